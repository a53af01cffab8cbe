"""
(C)ommand (L)ine (I)nterface utilities
"""
import sys
import math
import shutil
from datetime import datetime, timezone
from typing import TextIO


def isatty(stream):
    """Return true if the given stream (e.g. sys.stdout, sys.stderr)
    is interactive
    """
    # isatty is not implemented by all file-like objects (e.g. StringIO
    # replacements):
    try:
        return stream.isatty()
    except AttributeError:
        return False


class ProgressBar:
    """Progress bar over a known number of work items (e.g. folds). Draws a
    bar with ANSI codes on interactive terminals, and prints one line per
    update ("3/112 folds ...") otherwise. Use as context manager::

        with ProgressBar(len(folds), 'folds') as pbar:
            for fold in folds:
                ...
                pbar.update()

    :param total: the number of work items
    :param unit: the name of the work items, printed in text mode
    :param target: the output stream (None: no output)
    """

    def __init__(self, total: int, unit='items',
                 target: TextIO or None = sys.stderr):
        self._target = target
        self._text_only = not isatty(self._target)
        self._total = max(int(total), 1)
        self._unit = unit
        self._done = 0
        self._start = None

    def __enter__(self):
        self._start = datetime.now(timezone.utc)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if not self._target:
            return
        if not self._text_only:
            # ANSI output ends with a newline
            self._target.write('\n')
        self._target.flush()

    def update(self, count=1):
        self._done = min(self._total, self._done + count)
        if not self._target:
            return
        progress = self._done / self._total
        eta_str = self.eta_str(progress)
        if self._text_only:
            self._target.write(f'{self._done}/{self._total} {self._unit}'
                               f'{eta_str}\n')
        else:
            width, _ = shutil.get_terminal_size((80, 20))
            # leave room for brackets, percentage and eta:
            width = max(3, width - 1 - 2 - 5 - len(eta_str))
            pbar_str = self.progress_bar_str(progress, width)
            self._target.write(f'\033[G[{pbar_str}]'
                               f'{int(0.5 + progress * 100):4d}%{eta_str}')
        self._target.flush()

    def eta_str(self, progress):
        if self._start is None or progress <= 0:
            return ''
        elapsed = datetime.now(timezone.utc) - self._start
        eta = (1 - progress) * elapsed / progress
        sec = round(eta.total_seconds() + 1e-7)  # rounds half up
        hrs, sec = divmod(sec, 3600)
        mnt, sec = divmod(sec, 60)
        return f' ETA {hrs:02}:{mnt:02}:{sec:02}'

    @staticmethod
    def progress_bar_str(progress: float, width: int):
        # 0 <= progress <= 1
        progress = min(1, max(0, progress))
        whole_width = math.floor(progress * width)
        part_width = math.floor(((progress * width) % 1) * 8)
        part_char = [" ", "▏", "▎", "▍", "▌", "▋", "▊", "▉"][part_width]
        if (width - whole_width - 1) < 0:
            part_char = ""
        return "█" * whole_width + part_char + " " * (width - whole_width - 1)
