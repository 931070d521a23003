"""Python bindings for the oeg face-dynamics pipeline."""

from ._core import (
    Gmm,
    OegError,
    categories,
    fit_var,
    geodesic_velocity,
    hosvd,
    loso_cv,
    principal_angles,
    psd_distance,
    responder,
    supervector,
    synth_subject,
    train_ubm,
)

__all__ = [
    "Gmm",
    "OegError",
    "categories",
    "fit_var",
    "geodesic_velocity",
    "hosvd",
    "loso_cv",
    "principal_angles",
    "psd_distance",
    "responder",
    "supervector",
    "synth_subject",
    "train_ubm",
]
