"""Model checkpoints in the shared binary envelope."""

import logging
from typing import Any, Dict, Optional, Tuple

from src.data.binary_envelope import pack_arrays, read_envelope, unpack_arrays, write_envelope
from src.errors import CacheCorrupt, InvalidInput
from src.losses.hint import HintRegressor
from src.training.mlp import MlpModel

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FTCK"


def save_checkpoint(path: str, model: MlpModel, regressor: Optional[HintRegressor] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> str:
    """Writes the model (and the hint regressor, if any). Returns the file's SHA-256."""
    arrays = dict(model.params)
    if regressor is not None:
        arrays.update(regressor.params)
    layout, payload = pack_arrays(arrays)
    header = {
        "kind": "mlp",
        "widths": list(model.widths),
        "has_regressor": regressor is not None,
        "metadata": metadata or {},
        **layout,
    }
    digest = write_envelope(path, CHECKPOINT_MAGIC, header, payload)
    logger.debug("Saved checkpoint %s (%s)", path, digest[:12])
    return digest


def load_checkpoint(path: str, expected_classes: Optional[int] = None
                    ) -> Tuple[MlpModel, Optional[HintRegressor], Dict[str, Any]]:
    """
    Reads a checkpoint written by `save_checkpoint`.

    Raises:
        CacheCorrupt: checksum or layout failure, or a class count different
            from `expected_classes`.
    """
    header, payload = read_envelope(path, CHECKPOINT_MAGIC)
    arrays = unpack_arrays(header, payload)
    try:
        regressor = None
        if header.get("has_regressor"):
            regressor = HintRegressor(weight=arrays.pop("reg_W"), bias=arrays.pop("reg_b"))
        model = MlpModel(header["widths"], arrays)
    except (KeyError, InvalidInput) as e:
        raise CacheCorrupt(f"Checkpoint '{path}' has an inconsistent layout: {e}")
    if expected_classes is not None and model.num_classes != expected_classes:
        raise CacheCorrupt(
            f"Checkpoint '{path}' has {model.num_classes} classes, dataset has {expected_classes}")
    return model, regressor, header.get("metadata", {})
