"""Non-parallel Mel-cepstral sequence conversion.

Thin re-export of the native module: differentiable ops, the generator and
discriminator networks, the training objective pieces, feature file I/O and
the MCD/MSD evaluation metrics, plus train/convert/evaluate/synth pipeline
entry points.
"""

from ._cyclevc import (  # noqa: F401
    ComputeError,
    Discriminator,
    Generator,
    ValidationError,
    conv2d,
    convert,
    convert_f0,
    cycle_loss,
    differential_mceps,
    dtw_align,
    evaluate,
    glu,
    grad_check_all,
    identity_loss,
    instance_norm,
    lsgan_d_loss,
    lsgan_g_loss,
    mcd,
    msd,
    pixel_shuffle,
    read_features,
    synth,
    train,
    write_features,
)
