"""Input checks shared by the estimator facades and the CLI."""

from __future__ import annotations

from .corpus import Corpus, LabelSchema
from .errors import MissingLayerError, SchemaError


def check_corpus(
    X,
    *,
    layer: str | None = None,
    schema: LabelSchema | None = None,
) -> Corpus:
    """Require a Corpus, optionally with a given layer and schema.

    Raises TypeError on a non-corpus, MissingLayerError when ``layer``
    is absent, and SchemaError when the schema differs from ``schema``.
    """
    if not isinstance(X, Corpus):
        raise TypeError(f"expected a Corpus, got {type(X).__name__}")
    if layer is not None and not X.has_layer(layer):
        raise MissingLayerError(
            f"corpus is missing the {layer!r} layer; available: {list(X.layer_names)}"
        )
    if schema is not None and X.schema != schema:
        raise SchemaError(
            f"corpus schema {X.schema.entity_types} does not match "
            f"the expected schema {schema.entity_types}"
        )
    return X


def check_seed(seed) -> int:
    """Require an explicit integer seed; there is no wall-clock fallback."""
    if isinstance(seed, bool) or not isinstance(seed, (int,)):
        raise TypeError(f"seed must be an int, got {type(seed).__name__}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative: {seed}")
    return int(seed)
