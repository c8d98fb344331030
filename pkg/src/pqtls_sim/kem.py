"""KEM variants, their wire sizes, hybrid composition and operation costs.

Sizes are bytes. Operation costs are milliseconds and come from an external
cost file; the package ships an all-zero file and a clearly labelled example.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CostFileMalformed, CostFileMissingEntry, NoClassicalPartner, UnknownAlgorithm

KEY_SHARE_LIMIT = 2**16 - 1


class Family(enum.Enum):
    LATTICE = "Lattice"
    CODE = "Code"
    ISOGENY = "Isogeny"
    CLASSICAL = "Classical"


class Role(enum.Enum):
    CANDIDATE = "Candidate"
    ALTERNATIVE = "Alternative"
    CLASSICAL_BASELINE = "ClassicalBaseline"


@dataclass(frozen=True)
class KemSpec:
    id: str
    family: Family
    nist_level: int
    role: Role
    pk_bytes: int
    ct_bytes: int
    sk_bytes: int
    components: tuple[str, ...] = ()

    @property
    def is_hybrid(self) -> bool:
        return len(self.components) == 2

    @property
    def pq_id(self) -> str:
        return self.components[1] if self.is_hybrid else self.id


# (id, family, level, role, pk, sk, ct)
_L, _C, _I, _E = Family.LATTICE, Family.CODE, Family.ISOGENY, Family.CLASSICAL
_CAND, _ALT, _BASE = Role.CANDIDATE, Role.ALTERNATIVE, Role.CLASSICAL_BASELINE

_SHIPPED = [
    ("classic_mceliece_l1", _C, 1, _CAND, 261120, 6492, 128),
    ("classic_mceliece_l3", _C, 3, _CAND, 524160, 13608, 188),
    ("classic_mceliece_l5_6688128", _C, 5, _CAND, 1044992, 13932, 240),
    ("classic_mceliece_l5_6960119", _C, 5, _CAND, 1047319, 13948, 226),
    ("classic_mceliece_l5_8192128", _C, 5, _CAND, 1357824, 14120, 240),
    ("kyber512", _L, 1, _CAND, 800, 1632, 768),
    ("kyber768", _L, 3, _CAND, 1184, 2400, 1088),
    ("kyber1024", _L, 5, _CAND, 1568, 3168, 1568),
    ("ntru_hps2048509", _L, 1, _CAND, 699, 935, 699),
    ("ntru_hps2048677", _L, 3, _CAND, 930, 1234, 930),
    ("ntru_hps4096821", _L, 5, _CAND, 1230, 1592, 1230),
    ("ntru_hrss701", _L, 3, _CAND, 1138, 1452, 1138),
    # secret keys listed with two figures; the first is kept
    ("lightsaber", _L, 1, _CAND, 672, 1568, 736),
    ("saber", _L, 3, _CAND, 992, 2304, 1088),
    ("firesaber", _L, 5, _CAND, 1312, 3040, 1472),
    ("bikel1", _C, 1, _ALT, 1541, 5223, 1573),
    ("bikel3", _C, 3, _ALT, 3083, 10105, 3115),
    ("frodo640shake", _L, 1, _ALT, 9616, 19888, 9720),
    ("frodo976shake", _L, 3, _ALT, 15632, 31296, 15744),
    ("frodo1344shake", _L, 5, _ALT, 21520, 43088, 21632),
    ("hqc128", _C, 1, _ALT, 2249, 2289, 4481),
    ("hqc192", _C, 3, _ALT, 4522, 4562, 9026),
    ("hqc256", _C, 5, _ALT, 7245, 7285, 14469),
    ("sntrup761", _L, 2, _ALT, 1158, 1763, 1039),
    ("sntrup857", _L, 3, _ALT, 1322, 1999, 1184),
    ("sntrup953", _L, 4, _ALT, 1349, 1652, 1477),
    ("sntrup1277", _L, 5, _ALT, 2067, 3059, 1847),
    ("ntrulpr761", _L, 2, _ALT, 1039, 1294, 1167),
    ("ntrulpr857", _L, 3, _ALT, 1184, 1463, 1312),
    ("ntrulpr953", _L, 4, _ALT, 1455, 1773, 1583),
    ("ntrulpr1277", _L, 5, _ALT, 1847, 2231, 1975),
    ("sikep503", _I, 1, _ALT, 378, 434, 402),
    ("sikep610", _I, 3, _ALT, 462, 524, 486),
    ("sikep751", _I, 5, _ALT, 564, 644, 596),
    ("sikep503_compressed", _I, 2, _ALT, 225, 407, 280),
    ("sikep610_compressed", _I, 3, _ALT, 274, 491, 336),
    ("sikep751_compressed", _I, 5, _ALT, 335, 602, 410),
]

# level -> (curve id, hybrid prefix, coordinate bytes)
CLASSICAL_BY_LEVEL = {
    1: ("prime256v1", "p256", 32),
    3: ("secp384r1", "p384", 48),
    5: ("secp521r1", "p521", 66),
}


def ecdh_share_bytes(coordinate_bytes: int, format_byte: bool = True) -> int:
    """Size of an uncompressed EC point; without the format byte it is just x||y."""
    return 2 * coordinate_bytes + (1 if format_byte else 0)


class Catalog:
    """Immutable id -> KemSpec table, with hybrids synthesized on lookup."""

    def __init__(self, specs: Iterable[KemSpec]):
        table: dict[str, KemSpec] = {}
        for s in specs:
            if s.id in table:
                raise ValueError(f"duplicate algorithm id {s.id!r}")
            table[s.id] = s
        self._table = table

    def __contains__(self, alg_id: str) -> bool:
        try:
            self.lookup(alg_id)
        except (UnknownAlgorithm, NoClassicalPartner):
            return False
        return True

    def __iter__(self):
        return iter(self._table.values())

    def __len__(self):
        return len(self._table)

    def ids(self) -> list[str]:
        return list(self._table)

    def lookup(self, alg_id: str) -> KemSpec:
        spec = self._table.get(alg_id)
        if spec is not None:
            return spec
        prefix, _, rest = alg_id.partition("_")
        if rest and any(prefix == p for _, p, _ in CLASSICAL_BY_LEVEL.values()):
            hybrid = self.make_hybrid(rest)
            if hybrid.id == alg_id:
                return hybrid
        raise UnknownAlgorithm(alg_id)

    def make_hybrid(self, pqc_id: str) -> KemSpec:
        pqc = self.lookup(pqc_id)
        if pqc.family is Family.CLASSICAL or pqc.is_hybrid:
            raise NoClassicalPartner(f"{pqc_id} cannot be combined with a classical share")
        partner = CLASSICAL_BY_LEVEL.get(pqc.nist_level)
        if partner is None:
            raise NoClassicalPartner(f"no classical curve mapped to level {pqc.nist_level}")
        curve_id, prefix, _ = partner
        classical = self.lookup(curve_id)
        return KemSpec(
            id=f"{prefix}_{pqc.id}",
            family=pqc.family,
            nist_level=pqc.nist_level,
            role=pqc.role,
            pk_bytes=classical.pk_bytes + pqc.pk_bytes,
            ct_bytes=classical.ct_bytes + pqc.ct_bytes,
            sk_bytes=classical.sk_bytes + pqc.sk_bytes,
            components=(classical.id, pqc.id),
        )

    def base_ids(self, alg_ids: Iterable[str]) -> list[str]:
        """Catalog ids whose costs are needed to evaluate ``alg_ids``."""
        out: list[str] = []
        for a in alg_ids:
            spec = self.lookup(a)
            for c in spec.components or (spec.id,):
                if c not in out:
                    out.append(c)
        return out


def default_catalog(ecdh_format_byte: bool = True) -> Catalog:
    specs = [KemSpec(i, f, lvl, r, pk, ct, sk) for i, f, lvl, r, pk, sk, ct in _SHIPPED]
    for level, (curve_id, _, coord) in CLASSICAL_BY_LEVEL.items():
        share = ecdh_share_bytes(coord, ecdh_format_byte)
        specs.append(KemSpec(curve_id, Family.CLASSICAL, level, Role.CLASSICAL_BASELINE,
                             share, share, coord))
    return Catalog(specs)


_DEFAULT = default_catalog()


def lookup(alg_id: str) -> KemSpec:
    return _DEFAULT.lookup(alg_id)


def make_hybrid(pqc_id: str) -> KemSpec:
    return _DEFAULT.make_hybrid(pqc_id)


def load_catalog(path: str | Path, base: Catalog | None = None) -> Catalog:
    """Read ``id family level role pk_bytes sk_bytes ct_bytes`` records.

    Entries override or extend ``base`` (the shipped catalog by default).
    """
    table = {s.id: s for s in (base if base is not None else _DEFAULT)}
    for lineno, fields in _records(path):
        if len(fields) != 7:
            raise CostFileMalformed(f"{path}:{lineno}: expected 7 fields, got {len(fields)}")
        try:
            alg_id, fam, lvl, role, pk, sk, ct = fields
            spec = KemSpec(alg_id, Family(fam), int(lvl), Role(role), int(pk), int(ct), int(sk))
        except ValueError as exc:
            raise CostFileMalformed(f"{path}:{lineno}: {exc}") from None
        if min(spec.pk_bytes, spec.ct_bytes, spec.sk_bytes) <= 0:
            raise CostFileMalformed(f"{path}:{lineno}: sizes must be positive")
        table[spec.id] = spec
    return Catalog(table.values())


@dataclass(frozen=True)
class OpCosts:
    keygen_ms: float = 0.0
    encaps_ms: float = 0.0
    decaps_ms: float = 0.0

    def __add__(self, other: "OpCosts") -> "OpCosts":
        return OpCosts(self.keygen_ms + other.keygen_ms, self.encaps_ms + other.encaps_ms,
                       self.decaps_ms + other.decaps_ms)

    @property
    def total_ms(self) -> float:
        return self.keygen_ms + self.encaps_ms + self.decaps_ms


class CostModel:
    def __init__(self, entries: Mapping[str, OpCosts], source_label: str = ""):
        self.entries = dict(entries)
        self.source_label = source_label

    def costs(self, spec: KemSpec | str, catalog: Catalog | None = None) -> OpCosts:
        if isinstance(spec, str):
            spec = (catalog or _DEFAULT).lookup(spec)
        total = OpCosts()
        for part in spec.components or (spec.id,):
            if part not in self.entries:
                raise CostFileMissingEntry(part)
            total = total + self.entries[part]
        return total

    @classmethod
    def zeros(cls, catalog: Catalog | None = None) -> "CostModel":
        cat = catalog or _DEFAULT
        return cls({i: OpCosts() for i in cat.ids()}, "zeros")


def _records(path):
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def load_cost_model(path: str | Path, required_ids: Iterable[str] | None = None,
                    catalog: Catalog | None = None) -> CostModel:
    """Parse ``id keygen_ms encaps_ms decaps_ms`` lines.

    Every id in ``required_ids`` (all catalog ids when omitted) must have an
    entry; hybrid ids resolve to their two components.
    """
    cat = catalog or _DEFAULT
    entries: dict[str, OpCosts] = {}
    for lineno, fields in _records(path):
        if len(fields) != 4:
            raise CostFileMalformed(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
        try:
            values = [float(v) for v in fields[1:]]
        except ValueError:
            raise CostFileMalformed(f"{path}:{lineno}: non-numeric cost") from None
        if any(v < 0 or v != v for v in values):
            raise CostFileMalformed(f"{path}:{lineno}: costs must be non-negative")
        entries[fields[0]] = OpCosts(*values)
    needed = cat.ids() if required_ids is None else cat.base_ids(required_ids)
    for alg_id in needed:
        if alg_id not in entries:
            raise CostFileMissingEntry(alg_id)
    return CostModel(entries, source_label=str(path))


def shipped_cost_file(name: str = "costs_zero.txt") -> Path:
    return Path(str(resources.files("pqtls_sim") / "data" / name))
