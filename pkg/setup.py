from setuptools import setup, find_packages

_README = """
Python program to train and evaluate LSTM-QoE models predicting the
continuous (per-second) quality of experience of video streaming sessions
"""

setup(
    name='qoelstm',
    version='1.0.0',
    description=_README,
    packages=find_packages(exclude=['tests', 'tests.*']),
    python_requires='>=3.8',
    # Minimal requirements, for a complete list see requirements.txt
    install_requires=[
        'numpy>=1.20.0',
        'scipy>=1.5.0',
        'joblib>=1.0.0'
    ],
    # List additional groups of dependencies here (e.g. development
    # dependencies). You can install these using the following syntax,
    # for example:
    # $ pip install -e .[dev]
    extras_require={
        'dev': [
            'scikit-learn>=0.24.0',
            'pytest>=6.0'
        ]
    },
    classifiers=(
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
    ),
    keywords=[
        "quality of experience",
        "video streaming",
        "rebuffering",
        "lstm",
        "recurrent neural network",
        "machine learning"
    ],
    license="GPL3",
    platforms=["any"],
    zip_safe=False,
    # To provide executable scripts, use entry points in preference to the
    # "scripts" keyword. Entry points provide cross-platform support and allow
    # pip to create the appropriate form of executable for the target platform.
    entry_points={
        'console_scripts': [
            'qoelstm=qoelstm.run:cli_entry_point',
        ],
    },
)
