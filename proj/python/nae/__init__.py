"""End-to-end non-negative autoencoders for single-channel source separation.

Waveforms are 1-D float64 numpy arrays; a model's ``config.sample_rate``
gives their rate.
"""

from ._nae import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    GRADCHECK_TOLERANCE,
    InferenceConfig,
    Model,
    ModelConfig,
    TrainConfig,
    VersionError,
    boxplot_stats,
    gradcheck,
    inference_param_count,
    mix_at_snr,
    read_wav,
    resample,
    sdr_ratio,
    separate,
    sisdr,
    snippet,
    synth_corpus,
    train_discriminative,
    train_generative,
    write_wav,
)

__all__ = [name for name in dir() if not name.startswith("_")]
