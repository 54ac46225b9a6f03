"""Candidate measurement rows, real stacking, and measurement simulation.

Every quantity a monitor could report at order h is a linear function of the
bus injection vector: bus voltages are rows of Z^h, branch currents follow
from the pi-model branch law applied to Z^h rows.  Collecting all of them
gives the (N_b + N_l) x N_b complex candidate matrix from which a sensing
design selects its rows.

Complex systems are handed to the real solvers in stacked form::

    [[Re  -Im]   [Re(x)]     [Re(y)]
     [Im   Re]]  [Im(x)]  =  [Im(y)]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import HarmonicOrderModel


@dataclass(frozen=True)
class RowTag:
    """Physical meaning of one candidate row.

    ``kind`` is "voltage" (bus voltage phasor) or "current" (branch current
    phasor, measured at the from side, oriented from->to).
    """

    kind: str
    bus: int | None = None
    from_bus: int | None = None
    to_bus: int | None = None
    branch_index: int | None = None

    def label(self) -> str:
        if self.kind == "voltage":
            return f"V(bus {self.bus})"
        return f"I(branch {self.branch_index}: {self.from_bus}->{self.to_bus})"


@dataclass(frozen=True)
class CandidateMatrix:
    order: int
    rows: np.ndarray                      # (N_b + N_l) x N_b complex
    row_tags: tuple[RowTag, ...]

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_bus(self) -> int:
        return self.rows.shape[1]


def build_candidate_matrix(model: HarmonicOrderModel) -> CandidateMatrix:
    """All possible measurement rows for one harmonic order.

    First N_b rows: bus voltages, i.e. rows of Z^h.  Next N_l rows: branch
    currents y_ff * Z_i-row + y_ft * Z_j-row (for tap 1 this is the pi branch
    law y_ij (Z_i - Z_j) + y_sh Z_i).
    """
    case = model.case
    z = model.zbus
    n = model.n_bus
    rows = np.zeros((n + case.n_branch, n), dtype=complex)
    rows[:n] = z
    tags = [RowTag("voltage", bus=b.id) for b in case.buses]
    for k, (br, adm) in enumerate(zip(case.branches, model.branch_admittances)):
        i = case.index_of(br.from_bus)
        j = case.index_of(br.to_bus)
        rows[n + k] = adm.y_from_from * z[i] + adm.y_from_to * z[j]
        tags.append(
            RowTag(
                "current",
                from_bus=br.from_bus,
                to_bus=br.to_bus,
                branch_index=k,
            )
        )
    return CandidateMatrix(model.order, rows, tuple(tags))


def stack_real(a: np.ndarray) -> np.ndarray:
    """Map a complex matrix/vector to its real stacked form.

    Matrices map to [[Re, -Im], [Im, Re]]; vectors to [Re; Im].  The stacking
    is a ring homomorphism: stack(A) @ stack(B) == stack(A @ B).
    """
    a = np.asarray(a)
    if a.ndim == 1:
        return np.concatenate([a.real, a.imag])
    if a.ndim == 2:
        return np.block([[a.real, -a.imag], [a.imag, a.real]])
    raise ValueError(f"expected 1-D or 2-D array, got ndim={a.ndim}")


def unstack(v: np.ndarray) -> np.ndarray:
    """Inverse of the vector stacking: [Re; Im] -> complex."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError("unstack expects a 1-D real vector")
    if v.size % 2:
        raise ValueError(f"stacked vector must have even length, got {v.size}")
    half = v.size // 2
    return v[:half] + 1j * v[half:]


@dataclass(frozen=True)
class CorruptionSpec:
    """Noise model for the degraded-conditions study.

    All three standard deviations are fractions: measurement noise and matrix
    error are relative to the RMS of the uncorrupted vector/matrix elements
    (one scale per vector/matrix); the background injection std is relative
    to the largest source magnitude of the same order.
    """

    measurement_noise_std: float = 0.05
    matrix_error_std: float = 0.05
    background_injection_std: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        for name in (
            "measurement_noise_std",
            "matrix_error_std",
            "background_injection_std",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class MeasurementSet:
    order: int
    values: np.ndarray                    # complex, length N_m
    tags: tuple[RowTag, ...]

    @property
    def stacked(self) -> np.ndarray:
        return stack_real(self.values)


def simulate_measurements(
    candidates: CandidateMatrix,
    selected_rows,
    injections: np.ndarray,
    corruption: CorruptionSpec | None = None,
) -> MeasurementSet:
    """Forward-simulate the monitor readings for one order.

    ``selected_rows`` indexes the candidate matrix (a SensingDesign's row
    set).  Without corruption the values are exactly rows @ injections; with
    corruption, independent Gaussian noise of std
    measurement_noise_std * RMS(|values|) is added to real and imaginary
    parts of every measurement.
    """
    idx = np.asarray(list(selected_rows), dtype=int)
    injections = np.asarray(injections, dtype=complex)
    if injections.shape != (candidates.n_bus,):
        raise ValueError(
            f"injection vector must have length {candidates.n_bus}, "
            f"got {injections.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= candidates.n_rows):
        raise ValueError("selected rows out of candidate-matrix bounds")
    values = candidates.rows[idx] @ injections
    if corruption is not None and corruption.measurement_noise_std > 0:
        rng = np.random.default_rng(corruption.rng_seed)
        scale = corruption.measurement_noise_std * _rms(values)
        if scale > 0:
            noise = rng.normal(0.0, scale, size=(2, idx.size))
            values = values + noise[0] + 1j * noise[1]
    tags = tuple(candidates.row_tags[i] for i in idx)
    return MeasurementSet(candidates.order, values, tags)


def corrupt_matrix(h: np.ndarray, corruption: CorruptionSpec) -> np.ndarray:
    """Perturb each element of a real sensing matrix.

    Gaussian noise with std = matrix_error_std * RMS(elements); the input is
    returned unchanged (same object) when the std is zero.
    """
    if corruption.matrix_error_std == 0:
        return h
    rng = np.random.default_rng(corruption.rng_seed)
    scale = corruption.matrix_error_std * _rms(h)
    return h + rng.normal(0.0, scale, size=h.shape)


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(a) ** 2)))


@dataclass(frozen=True)
class InjectionScenario:
    """Ground truth for one experiment: per-order injections and support."""

    orders: tuple[int, ...]
    support: tuple[int, ...]              # bus indices (0-based positions)
    injections: dict[int, np.ndarray] = field(compare=False)
    background_std: dict[int, float] = field(compare=False)

    def injection(self, order: int) -> np.ndarray:
        return self.injections[order]


def make_injection_scenario(
    n_bus: int,
    k: int,
    orders,
    magnitude_mean: float = 0.2,
    magnitude_std: float = 0.05,
    reference_order: int = 3,
    corruption: CorruptionSpec | None = None,
    seed: int = 0,
) -> InjectionScenario:
    """Draw a sparse harmonic-injection ground truth.

    ``k`` support buses are drawn uniformly without replacement and shared
    across orders.  Magnitudes are drawn per order from
    N(mean, std) * reference_order / h (low orders inject more), phases
    uniform on [0, 2pi).  With corruption, every non-support bus receives a
    background injection with magnitude std
    background_injection_std * (max support magnitude of the same order).
    """
    orders = tuple(int(h) for h in orders)
    if not orders:
        raise ValueError("orders must be nonempty")
    if k > n_bus:
        raise ValueError(f"sparsity k={k} exceeds bus count {n_bus}")
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(n_bus, size=k, replace=False)) if k else np.array([], dtype=int)
    injections: dict[int, np.ndarray] = {}
    background_std: dict[int, float] = {}
    for h in orders:
        x = np.zeros(n_bus, dtype=complex)
        scale = reference_order / h
        if k:
            mags = np.abs(rng.normal(magnitude_mean, magnitude_std, size=k)) * scale
            phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
            x[support] = mags * np.exp(1j * phases)
        bg_std = 0.0
        if corruption is not None and corruption.background_injection_std > 0 and k:
            bg_std = corruption.background_injection_std * float(np.max(np.abs(x[support])))
            rest = np.setdiff1d(np.arange(n_bus), support)
            bg_mags = np.abs(rng.normal(0.0, bg_std, size=rest.size))
            bg_phases = rng.uniform(0.0, 2.0 * np.pi, size=rest.size)
            x[rest] = bg_mags * np.exp(1j * bg_phases)
        injections[h] = x
        background_std[h] = bg_std
    return InjectionScenario(orders, tuple(int(i) for i in support), injections, background_std)
