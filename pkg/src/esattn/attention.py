"""Attention modulation strategies over explicit region partitions.

Three per-key-column softmax strategies are provided: plain scaled
dot-product attention, hard modulation (edit-query logits forced to a large
surrogate, with the exact M -> infinity limit available separately), and the
effects-sensitive variant that adds a bias delta = alpha * std(S) to the
(edit queries x object keys) block while leaving every other interaction
untouched.  The insertion and restoration biases are configured
independently (alpha_insert / alpha_restore).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .numerics import columnwise_softmax, population_std, validate_logits

STD_SCOPES = ("all-entries", "per-column")


def _index_tuple(indices, n: int, name: str) -> tuple[int, ...]:
    out = tuple(sorted(int(i) for i in indices))
    if len(set(out)) != len(out):
        raise DomainError(f"{name} contains duplicate indices")
    if out and (out[0] < 0 or out[-1] >= n):
        raise DomainError(f"{name} indices must lie in [0, {n}), got {out}")
    return out


@dataclass(frozen=True)
class RegionPartition:
    """Index sets splitting queries into edit/aux (aux = effect + other)
    and keys into object/background subsets.

    ``restore_queries`` is the query set receiving the restoration bias
    against background keys; it defaults to ``other`` and must stay inside
    ``aux``.
    """

    n_queries: int
    edit: tuple[int, ...]
    aux: tuple[int, ...]
    effect: tuple[int, ...] = ()
    other: tuple[int, ...] | None = None
    n_keys: int = 1
    object_keys: tuple[int, ...] = ()
    background_keys: tuple[int, ...] = ()
    restore_queries: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_queries < 1 or self.n_keys < 1:
            raise DomainError("n_queries and n_keys must be at least 1")
        edit = _index_tuple(self.edit, self.n_queries, "edit")
        aux = _index_tuple(self.aux, self.n_queries, "aux")
        if not edit:
            raise DomainError("edit must be nonempty")
        if set(edit) & set(aux):
            raise DomainError("edit and aux must be disjoint")
        if set(edit) | set(aux) != set(range(self.n_queries)):
            raise DomainError("edit and aux must cover all query indices")
        effect = _index_tuple(self.effect, self.n_queries, "effect")
        other = self.other
        if other is None:
            other = tuple(sorted(set(aux) - set(effect)))
        other = _index_tuple(other, self.n_queries, "other")
        if set(effect) & set(other):
            raise DomainError("effect and other must be disjoint")
        if set(effect) | set(other) != set(aux):
            raise DomainError("effect and other must cover exactly the aux indices")
        object_keys = _index_tuple(self.object_keys, self.n_keys, "object_keys")
        background_keys = _index_tuple(self.background_keys, self.n_keys, "background_keys")
        if set(object_keys) & set(background_keys):
            raise DomainError("object_keys and background_keys must be disjoint")
        restore = self.restore_queries
        if restore is None:
            restore = other
        restore = _index_tuple(restore, self.n_queries, "restore_queries")
        if not set(restore) <= set(aux):
            raise DomainError("restore_queries must be a subset of aux")
        object.__setattr__(self, "edit", edit)
        object.__setattr__(self, "aux", aux)
        object.__setattr__(self, "effect", effect)
        object.__setattr__(self, "other", other)
        object.__setattr__(self, "object_keys", object_keys)
        object.__setattr__(self, "background_keys", background_keys)
        object.__setattr__(self, "restore_queries", restore)

    @classmethod
    def contiguous(cls, n_queries: int, n_edit: int, n_effect: int = 0,
                   n_keys: int = 1, all_object_keys: bool = True) -> "RegionPartition":
        """Partition with edit = [0, n_edit), effect immediately after, and
        (by default) every key treated as an object key."""
        if not 0 < n_edit <= n_queries:
            raise DomainError(f"n_edit must lie in [1, {n_queries}], got {n_edit}")
        if n_effect < 0 or n_edit + n_effect > n_queries:
            raise DomainError("n_effect out of range")
        edit = tuple(range(n_edit))
        aux = tuple(range(n_edit, n_queries))
        effect = tuple(range(n_edit, n_edit + n_effect))
        object_keys = tuple(range(n_keys)) if all_object_keys else ()
        return cls(n_queries=n_queries, edit=edit, aux=aux, effect=effect,
                   n_keys=n_keys, object_keys=object_keys)

    def to_json_dict(self) -> dict:
        return {
            "n_queries": self.n_queries,
            "edit": list(self.edit),
            "aux": list(self.aux),
            "effect": list(self.effect),
            "other": list(self.other),
            "n_keys": self.n_keys,
            "object_keys": list(self.object_keys),
            "background_keys": list(self.background_keys),
            "restore_queries": list(self.restore_queries),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RegionPartition":
        n_queries = int(d["n_queries"])
        edit = tuple(d["edit"])
        aux = tuple(d["aux"]) if "aux" in d else tuple(sorted(set(range(n_queries)) - set(edit)))
        return cls(
            n_queries=n_queries,
            edit=edit,
            aux=aux,
            effect=tuple(d.get("effect", ())),
            other=tuple(d["other"]) if "other" in d else None,
            n_keys=int(d.get("n_keys", 1)),
            object_keys=tuple(d.get("object_keys", ())),
            background_keys=tuple(d.get("background_keys", ())),
            restore_queries=tuple(d["restore_queries"]) if "restore_queries" in d else None,
        )


@dataclass(frozen=True)
class EsaConfig:
    """Bias strengths for insertion (alpha_insert, the edit x object block)
    and restoration (alpha_restore, the restore x background block), plus
    the scope over which std(S) is taken."""

    alpha_insert: float = 0.1
    alpha_restore: float = 1.0
    std_scope: str = "all-entries"

    def __post_init__(self):
        if self.alpha_insert < 0 or self.alpha_restore < 0:
            raise DomainError("alpha values must be nonnegative")
        if self.std_scope not in STD_SCOPES:
            raise DomainError(f"std_scope must be one of {STD_SCOPES}, got {self.std_scope!r}")


@dataclass(frozen=True)
class HardLimitForm:
    """Exact M -> infinity limit of hard modulation: every key column puts
    1/|edit| on each edit index and 0 on every aux index."""

    partition: RegionPartition

    def column(self) -> np.ndarray:
        col = np.zeros(self.partition.n_queries)
        col[list(self.partition.edit)] = 1.0 / len(self.partition.edit)
        return col

    def as_matrix(self, n_keys: int | None = None) -> np.ndarray:
        k = self.partition.n_keys if n_keys is None else n_keys
        return np.tile(self.column()[:, None], (1, k))


def build_logits(queries, keys) -> np.ndarray:
    """Scaled dot-product logits S_ij = q_i . k_j / sqrt(d)."""
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2:
        raise ShapeError("queries and keys must be 2-D matrices")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"inner dimension mismatch: {q.shape[1]} vs {k.shape[1]}")
    if q.shape[1] < 1:
        raise ShapeError("head dimension d must be at least 1")
    return (q @ k.T) / np.sqrt(q.shape[1])


def compute_delta(logits, alpha: float, scope: str = "all-entries"):
    """Bias magnitude delta = alpha * population std of the raw logits.

    Scope "all-entries" pools every S_ij and returns a float; "per-column"
    returns one delta per key column as an array.
    """
    arr = validate_logits(logits)
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    if scope == "all-entries":
        return alpha * population_std(arr)
    if scope == "per-column":
        return alpha * np.std(arr, axis=0)
    raise DomainError(f"std_scope must be one of {STD_SCOPES}, got {scope!r}")


def standard_attention(logits) -> np.ndarray:
    """Per-key softmax of the raw logits (column-stochastic map)."""
    return columnwise_softmax(logits)


def _check_partition_shape(arr: np.ndarray, partition: RegionPartition):
    if arr.shape != (partition.n_queries, partition.n_keys):
        raise ShapeError(
            f"logits shape {arr.shape} does not match partition "
            f"({partition.n_queries} queries x {partition.n_keys} keys)"
        )


def esa_attention_fixed_delta(logits, partition: RegionPartition,
                              delta_insert, delta_restore=0.0) -> np.ndarray:
    """Effects-sensitive map with explicitly supplied bias magnitudes.

    This isolates the softmax-with-bias map: deltas are treated as
    constants, which is also the differentiation convention used by the
    Jacobian checks.  Deltas may be scalars or per-key vectors.
    """
    arr = validate_logits(logits)
    _check_partition_shape(arr, partition)
    biased = arr.copy()
    d1 = np.broadcast_to(np.asarray(delta_insert, dtype=np.float64), (partition.n_keys,))
    d2 = np.broadcast_to(np.asarray(delta_restore, dtype=np.float64), (partition.n_keys,))
    if partition.edit and partition.object_keys:
        biased[np.ix_(partition.edit, partition.object_keys)] += d1[list(partition.object_keys)]
    if partition.restore_queries and partition.background_keys:
        biased[np.ix_(partition.restore_queries, partition.background_keys)] += d2[
            list(partition.background_keys)
        ]
    return columnwise_softmax(biased)


def esa_attention(logits, partition: RegionPartition, config: EsaConfig) -> np.ndarray:
    """Effects-sensitive attention (per-key softmax of the biased logits).

    Both deltas are computed once from the raw, pre-bias logits.  With
    alpha_insert = alpha_restore = 0 the result equals
    :func:`standard_attention` exactly.
    """
    arr = validate_logits(logits)
    _check_partition_shape(arr, partition)
    d1 = compute_delta(arr, config.alpha_insert, config.std_scope)
    d2 = compute_delta(arr, config.alpha_restore, config.std_scope)
    return esa_attention_fixed_delta(arr, partition, d1, d2)


def hard_attention_surrogate(logits, partition: RegionPartition, m: float) -> np.ndarray:
    """Hard modulation with the +infinity replaced by a finite logit ``m``:
    every edit-row logit becomes ``m`` in every key column."""
    arr = validate_logits(logits)
    _check_partition_shape(arr, partition)
    if not np.isfinite(m):
        raise DomainError("surrogate logit m must be finite")
    biased = arr.copy()
    biased[list(partition.edit), :] = m
    return columnwise_softmax(biased)


def hard_attention_limit(partition: RegionPartition) -> HardLimitForm:
    """Exact limiting distribution of hard modulation as m -> infinity."""
    return HardLimitForm(partition)
