from .samplers import (
    SAMPLE_FORMAT_VERSION,
    RecurrentSampler,
    constant_velocity,
    cv_gaussian_sample,
    generate_samples,
    load_samples,
    recurrent_gaussian_sample,
    save_samples,
    train_recurrent_sampler,
)

__all__ = [
    "SAMPLE_FORMAT_VERSION",
    "RecurrentSampler",
    "constant_velocity",
    "cv_gaussian_sample",
    "generate_samples",
    "load_samples",
    "recurrent_gaussian_sample",
    "save_samples",
    "train_recurrent_sampler",
]
