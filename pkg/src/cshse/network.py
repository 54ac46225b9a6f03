"""Power-network case handling and per-harmonic-order admittance models.

A network case is a bus/branch/generator description in per-unit on a common
MVA base.  For each harmonic order h the network is reduced to a complex nodal
admittance matrix Y^h (series branch impedances r + j*h*x, pi-model shunt
susceptances scaled by h, rotating machines as grounded subtransient shunts)
and its inverse, the bus impedance matrix Z^h.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class CaseFormatError(Exception):
    """Raised when a case file cannot be parsed or is missing fields."""


class CaseValidationError(Exception):
    """Raised when a parsed case violates a structural invariant."""


class SingularModelError(Exception):
    """Raised when Y^h has no usable inverse (no path to reference)."""


@dataclass(frozen=True)
class Bus:
    """Bus record; shunts are per unit on the system base.

    ``shunt_g + j h shunt_b`` models fixed capacitor/reactor banks (susceptance
    scales with the order).  The optional load admittance uses the parallel
    R-L law ``load_g - j load_b / h`` and is omitted from the harmonic model
    when both values are zero.
    """

    id: int
    name: str
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    load_g: float = 0.0
    load_b: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_sh: float = 0.0
    is_transformer: bool = False
    tap: float = 1.0


@dataclass(frozen=True)
class Generator:
    bus: int
    x_sub: float


@dataclass(frozen=True)
class NetworkCase:
    """Validated grid description; immutable once constructed."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    base_mva: float = 100.0
    base_kv: float = 138.0
    bus_index: dict[int, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "bus_index", {b.id: i for i, b in enumerate(self.buses)}
        )
        _validate_case(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    def index_of(self, bus_id: int) -> int:
        try:
            return self.bus_index[bus_id]
        except KeyError:
            raise CaseValidationError(f"unknown bus id {bus_id}") from None

    def summary(self) -> str:
        n_tr = sum(1 for br in self.branches if br.is_transformer)
        return (
            f"{self.n_bus} buses, {self.n_branch - n_tr} lines, "
            f"{n_tr} transformers, {len(self.generators)} generators"
        )


def _validate_case(case: NetworkCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        dup = sorted(i for i in set(ids) if ids.count(i) > 1)
        raise CaseValidationError(f"duplicate bus id(s): {dup}")
    if not case.branches:
        raise CaseValidationError("case has no branches")
    known = set(ids)
    for k, br in enumerate(case.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise CaseValidationError(
                    f"branch {k} ({br.from_bus}-{br.to_bus}) references "
                    f"missing bus {end}"
                )
        if br.r < 0:
            raise CaseValidationError(
                f"branch {k} ({br.from_bus}-{br.to_bus}) has r < 0"
            )
        if br.x == 0:
            raise CaseValidationError(
                f"branch {k} ({br.from_bus}-{br.to_bus}) has x = 0"
            )
        if br.tap <= 0:
            raise CaseValidationError(
                f"branch {k} ({br.from_bus}-{br.to_bus}) has tap <= 0"
            )
    for g in case.generators:
        if g.bus not in known:
            raise CaseValidationError(f"generator references missing bus {g.bus}")
        if g.x_sub <= 0:
            raise CaseValidationError(f"generator at bus {g.bus} has x_sub <= 0")
    # connectivity: Z^h exists as a single inverse only on one island
    adj: dict[int, set[int]] = {i: set() for i in ids}
    for br in case.branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(ids):
        missing = sorted(set(ids) - seen)
        raise CaseValidationError(
            f"branch graph is disconnected; unreachable buses {missing[:10]}"
        )


def load_case(path) -> NetworkCase:
    """Load and validate a case JSON file.

    Expected top-level keys: ``base_mva``, ``base_kv``, ``buses``
    (``{id, name, g, b}``), ``branches`` (``{from, to, r, x, b_sh,
    transformer, tap}``) and ``generators`` (``{bus, x_sub}``).
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    try:
        buses = tuple(
            Bus(
                id=int(b["id"]),
                name=str(b.get("name", f"Bus {b['id']}")),
                shunt_g=float(b.get("g", 0.0)),
                shunt_b=float(b.get("b", 0.0)),
                load_g=float(b.get("load_g", 0.0)),
                load_b=float(b.get("load_b", 0.0)),
            )
            for b in raw["buses"]
        )
        branches = tuple(
            Branch(
                from_bus=int(br["from"]),
                to_bus=int(br["to"]),
                r=float(br["r"]),
                x=float(br["x"]),
                b_sh=float(br.get("b_sh", 0.0)),
                is_transformer=bool(br.get("transformer", False)),
                tap=float(br.get("tap", 1.0) or 1.0),
            )
            for br in raw["branches"]
        )
        generators = tuple(
            Generator(bus=int(g["bus"]), x_sub=float(g["x_sub"]))
            for g in raw["generators"]
        )
        base_mva = float(raw.get("base_mva", 100.0))
        base_kv = float(raw.get("base_kv", 138.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseFormatError(f"{path}: malformed case record: {exc!r}") from exc
    return NetworkCase(buses, branches, generators, base_mva, base_kv)


@dataclass(frozen=True)
class BranchAdmittance:
    """Per-order pi-model admittances of one branch.

    ``y_series`` is the series admittance 1/(r + j*h*x), ``y_shunt`` the half
    shunt admittance j*h*b_sh/2, both already at order h.  With an off-nominal
    tap t the from-side nodal entries become (y_series + y_shunt)/t**2 and
    -y_series/t.
    """

    y_series: complex
    y_shunt: complex
    tap: float

    @property
    def y_from_from(self) -> complex:
        return (self.y_series + self.y_shunt) / self.tap**2

    @property
    def y_from_to(self) -> complex:
        return -self.y_series / self.tap


@dataclass(frozen=True)
class HarmonicOrderModel:
    order: int
    ybus: np.ndarray
    zbus: np.ndarray
    branch_admittances: tuple[BranchAdmittance, ...]
    case: NetworkCase

    @property
    def n_bus(self) -> int:
        return self.ybus.shape[0]


def build_harmonic_model(
    case: NetworkCase, h: int, inversion_tol: float = 1e-9
) -> HarmonicOrderModel:
    """Assemble Y^h and Z^h for harmonic order ``h``.

    Element model: series branch admittance 1/(r + j*h*x), pi shunt halves
    j*h*b_sh/2, bus shunts g + j*h*b, generators as grounded shunts
    1/(j*h*x_sub).  Loads are not part of the harmonic admittance.

    Raises ``SingularModelError`` when Y^h has no inverse within
    ``inversion_tol`` (max-abs element error of Y^h Z^h - I).
    """
    if not isinstance(h, (int, np.integer)) or h < 1 or h % 2 == 0:
        raise ValueError(f"harmonic order must be a positive odd integer, got {h}")
    n = case.n_bus
    ybus = np.zeros((n, n), dtype=complex)
    adms = []
    for br in case.branches:
        i = case.index_of(br.from_bus)
        j = case.index_of(br.to_bus)
        ys = 1.0 / (br.r + 1j * h * br.x)
        ysh = 1j * h * br.b_sh / 2.0
        adm = BranchAdmittance(ys, ysh, br.tap)
        adms.append(adm)
        t = br.tap
        ybus[i, i] += (ys + ysh) / t**2
        ybus[i, j] += -ys / t
        ybus[j, i] += -ys / t
        ybus[j, j] += ys + ysh
    for k, bus in enumerate(case.buses):
        ybus[k, k] += bus.shunt_g + 1j * h * bus.shunt_b
        if bus.load_g or bus.load_b:
            ybus[k, k] += bus.load_g - 1j * bus.load_b / h
    for g in case.generators:
        ybus[case.index_of(g.bus), case.index_of(g.bus)] += 1.0 / (1j * h * g.x_sub)
    try:
        zbus = np.linalg.inv(ybus)
    except np.linalg.LinAlgError as exc:
        raise SingularModelError(
            f"Y^{h} is singular (no admittance path to reference?)"
        ) from exc
    err = np.max(np.abs(ybus @ zbus - np.eye(n)))
    if not np.isfinite(err) or err > inversion_tol:
        raise SingularModelError(
            f"Y^{h} inversion failed: max |Y Z - I| = {err:.3e} exceeds "
            f"{inversion_tol:.1e}"
        )
    return HarmonicOrderModel(int(h), ybus, zbus, tuple(adms), case)
