"""Melt-pool domain adaptation: ops, augmentation, synthetic data and training."""

from ._core import (
    EMBEDDING_DIM,
    IMAGE_SIDE,
    CheckpointError,
    ConfigError,
    ContractError,
    DimensionError,
    Model,
    augment_blur,
    augment_dihedral,
    augment_zoom,
    batchnorm,
    bce,
    conv2d,
    discrepancy_loss,
    domain_loss,
    encoder_loss,
    generate_benchmark,
    linear,
    maxpool2d,
    relu,
    render_melt_pool,
    run_pipeline,
    sigmoid,
    zoom_range,
)

__all__ = [name for name in dir() if not name.startswith("_")]
