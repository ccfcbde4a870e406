from .config import VARIANTS, QslaConfig, check_variant, fingerprint
from .manifest import WeightManifest, load_manifest, tensors_from_bytes
from .network import (
    Model,
    ParamCounts,
    Prediction,
    build_model,
)

__all__ = [
    "VARIANTS", "QslaConfig", "check_variant", "fingerprint",
    "WeightManifest", "load_manifest", "tensors_from_bytes",
    "Model", "ParamCounts", "Prediction", "build_model",
]
