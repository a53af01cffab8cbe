from .lstm import NetworkConfig, LstmNetwork, CellState, init, step, \
    run_sequence, backward
from .features import (SessionTrace,
                       NormSpec,
                       FeatureSeries,
                       compute_pi,
                       compute_tr,
                       derive_norm,
                       featurize)
from .datasets import (Corpus,
                       SplitPlan,
                       load_corpus,
                       save_corpus,
                       make_plan,
                       split_netflix,
                       split_lfovia,
                       split_leave_p_out,
                       split_random)
from .training import TrainConfig, TrainingError, make_windows, fit
from .model import TrainedModel, predict
from .baseline import fit_affine, predict_affine
from .metrics import (lcc,
                      srocc,
                      rmse_n,
                      outage_rate,
                      pool_overall,
                      MetricsReport)
from .synth import SynthConfig, gen_trace, gen_corpus
