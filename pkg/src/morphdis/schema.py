"""Morphosyntactic feature schemas and factored/unfactored tag conversion.

A schema fixes, per language variant, the ordered feature inventory and the
closed value set of every feature.  The same order defines the unfactored
serialization: all feature values joined by ``+`` into one tag string, which
is bijective with the (default-filled) feature bundle.

Schemas are data, not code: they live in JSON documents (see
:func:`load_schema` / :func:`save_schema`) and four variants ship with the
package (``msa``, ``glf``, ``egy``, ``lev``).  The dialect documents extend
the 14 msa features with the two extra enclitic slots ``enc1``/``enc2``;
their value lists are a reasonable starting point and are meant to be
overridden by users with variant-specific documents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ParseError, SchemaError, UnknownFeature

# The full feature inventory any schema may draw from.
KNOWN_FEATURES = (
    "pos",
    "asp",
    "mod",
    "vox",
    "per",
    "gen",
    "num",
    "cas",
    "stt",
    "prc3",
    "prc2",
    "prc1",
    "prc0",
    "enc0",
    "enc1",
    "enc2",
)

CLITIC_FEATURES = frozenset({"prc3", "prc2", "prc1", "prc0", "enc0", "enc1", "enc2"})
PROCLITIC_FEATURES = frozenset({"prc3", "prc2", "prc1", "prc0"})

SEPARATOR = "+"
SCHEMA_FORMAT_VERSION = "1"
BUILTIN_VARIANTS = ("msa", "glf", "egy", "lev")

# Tag strings are plain ``str``; the alias marks signatures that carry one.
UnfactoredTag = str


@dataclass(frozen=True)
class FeatureDef:
    """One feature: its name, closed value set, and default sentinel."""

    name: str
    values: frozenset[str]
    default: str

    def __post_init__(self):
        if self.name not in KNOWN_FEATURES:
            raise SchemaError(f"unknown feature name: {self.name!r}")
        if not self.values:
            raise SchemaError(f"feature {self.name}: empty value set")
        for v in self.values:
            if SEPARATOR in v:
                raise SchemaError(
                    f"feature {self.name}: value {v!r} contains {SEPARATOR!r}"
                )
            if not v:
                raise SchemaError(f"feature {self.name}: empty value string")
        if self.default not in self.values:
            raise SchemaError(
                f"feature {self.name}: default {self.default!r} not in value set"
            )

    @property
    def cardinality(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, immutable feature inventory for one language variant."""

    variant: str
    features: tuple[FeatureDef, ...]
    version: str = "1"
    _by_name: dict[str, FeatureDef] = field(
        init=False, repr=False, compare=False, hash=False, default_factory=dict
    )

    def __post_init__(self):
        by_name: dict[str, FeatureDef] = {}
        for f in self.features:
            if f.name in by_name:
                raise SchemaError(f"duplicate feature: {f.name}")
            by_name[f.name] = f
        object.__setattr__(self, "_by_name", by_name)

    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature(self, name: str) -> FeatureDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownFeature(
                f"schema {self.variant!r} has no feature {name!r}"
            ) from None

    def has_feature(self, name: str) -> bool:
        return name in self._by_name

    def defaults(self) -> dict[str, str]:
        return {f.name: f.default for f in self.features}

    def fill_defaults(self, bundle: Mapping[str, str]) -> dict[str, str]:
        """Complete a sparse feature bundle with the schema defaults.

        Does not validate; see :meth:`validate_bundle`.
        """
        return {f.name: bundle.get(f.name, f.default) for f in self.features}

    def validate_bundle(self, bundle: Mapping[str, str]) -> None:
        """Check that every assigned feature exists and carries a legal value."""
        for name, value in bundle.items():
            fdef = self._by_name.get(name)
            if fdef is None:
                raise UnknownFeature(
                    f"schema {self.variant!r} has no feature {name!r}"
                )
            if value not in fdef.values:
                raise SchemaError(
                    f"feature {name}: value {value!r} not in schema {self.variant!r}"
                )

    def tag_space_size(self) -> int:
        """Number of distinct unfactored tags = product of cardinalities."""
        return math.prod(f.cardinality for f in self.features)

    def to_document(self) -> dict:
        return {
            "variant": self.variant,
            "version": self.version,
            "features": [
                {"name": f.name, "values": sorted(f.values), "default": f.default}
                for f in self.features
            ],
        }


def serialize_unfactored(bundle: Mapping[str, str], schema: FeatureSchema) -> UnfactoredTag:
    """Join a feature bundle into the single-tag form, in schema order.

    Missing features are filled with their defaults.  Raises ``ValueError``
    for values outside the schema or for feature names the schema lacks.
    """
    for name in bundle:
        if not schema.has_feature(name):
            raise ValueError(f"unknown feature for schema {schema.variant!r}: {name!r}")
    parts = []
    for fdef in schema.features:
        value = bundle.get(fdef.name, fdef.default)
        if value not in fdef.values:
            raise ValueError(
                f"invalid value for feature {fdef.name}: {value!r}"
            )
        parts.append(value)
    return SEPARATOR.join(parts)


def parse_unfactored(tag: UnfactoredTag, schema: FeatureSchema) -> dict[str, str]:
    """Split an unfactored tag string back into a full feature bundle."""
    if not tag:
        raise ParseError("empty unfactored tag")
    parts = tag.split(SEPARATOR)
    if len(parts) != len(schema.features):
        raise ParseError(
            f"expected {len(schema.features)} fields, got {len(parts)}: {tag!r}"
        )
    bundle = {}
    for fdef, value in zip(schema.features, parts):
        if value not in fdef.values:
            raise ParseError(
                f"invalid value for feature {fdef.name}: {value!r}"
            )
        bundle[fdef.name] = value
    return bundle


def _schema_from_document(doc: Mapping) -> FeatureSchema:
    if not isinstance(doc, Mapping):
        raise SchemaError("schema document must be a mapping")
    for key in ("variant", "features"):
        if key not in doc:
            raise SchemaError(f"schema document missing {key!r}")
    features = []
    for i, fdoc in enumerate(doc["features"]):
        if not isinstance(fdoc, Mapping):
            raise SchemaError(f"features[{i}] must be a mapping")
        missing = {"name", "values", "default"} - set(fdoc)
        if missing:
            raise SchemaError(f"features[{i}] missing {sorted(missing)}")
        values = list(fdoc["values"])
        if len(values) != len(set(values)):
            raise SchemaError(f"features[{i}] ({fdoc['name']}): duplicate values")
        features.append(
            FeatureDef(
                name=str(fdoc["name"]),
                values=frozenset(str(v) for v in values),
                default=str(fdoc["default"]),
            )
        )
    return FeatureSchema(
        variant=str(doc["variant"]),
        features=tuple(features),
        version=str(doc.get("version", "1")),
    )


def load_schema(source: str | Path | Mapping) -> FeatureSchema:
    """Load and validate a schema from a JSON document (path or mapping)."""
    if isinstance(source, Mapping):
        return _schema_from_document(source)
    path = Path(source)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    return _schema_from_document(doc)


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    """Write the canonical schema document (value lists sorted, stable keys)."""
    text = json.dumps(
        schema.to_document(), indent=2, sort_keys=True, ensure_ascii=False
    )
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_builtin(variant: str) -> FeatureSchema:
    """Load one of the schema documents shipped with the package."""
    if variant not in BUILTIN_VARIANTS:
        raise SchemaError(
            f"no builtin schema {variant!r}; available: {', '.join(BUILTIN_VARIANTS)}"
        )
    ref = resources.files("morphdis.data").joinpath(f"{variant}.json")
    return _schema_from_document(json.loads(ref.read_text(encoding="utf-8")))


def resolve_schema(spec: str | Path | FeatureSchema) -> FeatureSchema:
    """Accept a builtin variant id, a document path, or a ready schema."""
    if isinstance(spec, FeatureSchema):
        return spec
    if isinstance(spec, str) and spec in BUILTIN_VARIANTS:
        return load_builtin(spec)
    return load_schema(spec)
