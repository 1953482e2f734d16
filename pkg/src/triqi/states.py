"""Builders for every state in the protocol.

Mode convention (frozen): mode 0 carries the retained idler photon, modes 1
and 2 carry the two signal photons sent toward the target.  The entangled
triplet is ``cos(theta)|000> - i sin(theta)|111>`` with ``theta = g*t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import TruncationError
from .fock import (DEFAULT_DENSE_LIMIT, DensityOperator, Ket, SpaceDescriptor,
                   apply_mode_unitaries, as_diag_plus_low_rank, build_space)

BACKGROUND_VARIANTS = ("thermal", "flat")
IDLER_VARIANTS = ("paper_pure", "traced")

# Regime thresholds backing the qualitative conditions "nbar >> 1",
# "theta << 1", "eta << 1" and "1/nbar^2 << eta".  The last factor admits the
# weakest stated validity-grid point, eta * nbar^2 = 4.
HIGH_NOISE_MIN_NBAR = 10.0
SMALL_THETA_MAX = 0.1
SMALL_ETA_MAX = 0.1
ETA_INVN2_FACTOR = 3.0

DEFAULT_TAIL_BOUND = 1e-8
DEFAULT_LEAK_TOL = 1e-9
MAX_MODE_CUTOFF = 4096


@dataclass(frozen=True)
class RegimeFlags:
    """Validity-regime indicators attached to every parameter set."""

    high_noise: bool
    small_theta: bool
    small_eta: bool
    eta_vs_invn2: bool

    def all_hold(self) -> bool:
        return self.high_noise and self.small_theta and self.small_eta and self.eta_vs_invn2

    def as_dict(self) -> dict:
        return {
            "high_noise": self.high_noise,
            "small_theta": self.small_theta,
            "small_eta": self.small_eta,
            "eta_vs_invn2": self.eta_vs_invn2,
        }


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol parameter record.

    theta: interaction strength g*t (dimensionless, >= 0).
    eta: target reflectivity in [0, 1].
    nbar2, nbar3: background mean photon number per signal mode (> 0).
    cutoffs: explicit per-mode dimensions, or None for auto-selection.
    background: "thermal" (exact Bose-Einstein diagonal) or "flat" (uniform
        over the first round(nbar) levels).
    idler: "paper_pure" keeps the idler as the pure rotated single-photon
        superposition; "traced" uses the reduced diag(cos^2, sin^2) mixture.
    tail_bound: maximum tolerated thermal truncation tail mass.
    """

    theta: float
    eta: float
    nbar2: float
    nbar3: float
    cutoffs: tuple[int, int, int] | None = None
    background: str = "thermal"
    idler: str = "paper_pure"
    tail_bound: float = DEFAULT_TAIL_BOUND
    dense_limit: int = DEFAULT_DENSE_LIMIT

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.nbar2 <= 0 or self.nbar3 <= 0:
            raise ValueError("background mean photon numbers must be positive")
        if self.background not in BACKGROUND_VARIANTS:
            raise ValueError(f"background must be one of {BACKGROUND_VARIANTS}")
        if self.idler not in IDLER_VARIANTS:
            raise ValueError(f"idler must be one of {IDLER_VARIANTS}")
        if self.cutoffs is not None:
            cut = tuple(int(c) for c in self.cutoffs)
            if len(cut) != 3 or any(c < 2 for c in cut):
                raise ValueError(f"cutoffs must be three values >= 2, got {self.cutoffs}")
            object.__setattr__(self, "cutoffs", cut)

    @property
    def nbar_mean(self) -> float:
        return 0.5 * (self.nbar2 + self.nbar3)

    def regime_flags(self) -> RegimeFlags:
        nbar = min(self.nbar2, self.nbar3)
        return RegimeFlags(
            high_noise=nbar >= HIGH_NOISE_MIN_NBAR,
            small_theta=self.theta <= SMALL_THETA_MAX,
            small_eta=self.eta <= SMALL_ETA_MAX,
            eta_vs_invn2=self.eta * nbar * nbar >= ETA_INVN2_FACTOR,
        )

    def resolved_cutoffs(self) -> tuple[int, int, int]:
        """Explicit cutoffs, or the auto-selected ones (idler fixed at 2)."""
        if self.cutoffs is not None:
            return self.cutoffs
        if self.background == "flat":
            c1 = max(flat_levels(self.nbar2), 2)
            c2 = max(flat_levels(self.nbar3), 2)
        else:
            c1 = auto_cutoff(self.nbar2, self.tail_bound)
            c2 = auto_cutoff(self.nbar3, self.tail_bound)
        return (2, c1, c2)

    def space(self) -> SpaceDescriptor:
        return build_space(3, self.resolved_cutoffs(), self.dense_limit)

    def with_updates(self, **kwargs) -> "ProtocolParams":
        return replace(self, **kwargs)


def load_params(path, **overrides) -> ProtocolParams:
    """Read a plain-text key=value parameter preset.

    Recognized keys: theta, eta, nbar2, nbar3, cutoffs (comma separated),
    background, idler, tail_bound, dense_limit.  Lines starting with '#' and
    blank lines are ignored.
    """
    values = parse_key_values(Path(path).read_text())
    return params_from_mapping(values, **overrides)


def parse_key_values(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def params_from_mapping(values: dict[str, str], **overrides) -> ProtocolParams:
    known = {"theta", "eta", "nbar2", "nbar3", "cutoffs", "background", "idler",
             "tail_bound", "dense_limit"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("theta", "eta", "nbar2", "nbar3", "tail_bound"):
        if key in values:
            kwargs[key] = float(values[key])
    if "dense_limit" in values:
        kwargs["dense_limit"] = int(values["dense_limit"])
    if "cutoffs" in values:
        kwargs["cutoffs"] = tuple(int(c) for c in values["cutoffs"].split(","))
    for key in ("background", "idler"):
        if key in values:
            kwargs[key] = values[key]
    kwargs.update(overrides)
    return ProtocolParams(**kwargs)


# ---------------------------------------------------------------------------
# signal states
# ---------------------------------------------------------------------------

def three_photon_state(theta: float, space: SpaceDescriptor) -> Ket:
    """Closed-form entangled triplet ``cos(theta)|000> - i sin(theta)|111>``."""
    if space.modes != 3:
        raise ValueError("three-photon state needs a 3-mode space")
    if any(c < 2 for c in space.cutoffs):
        raise ValueError("all cutoffs must be >= 2 to hold the |111> component")
    amps = np.zeros(space.total_dim, dtype=complex)
    amps[space.index_of((0, 0, 0))] = np.cos(theta)
    amps[space.index_of((1, 1, 1))] = -1j * np.sin(theta)
    return Ket(space, amps)


@dataclass(frozen=True)
class EvolvedState:
    """Exact evolution of the vacuum under the triple down-conversion coupling,
    restricted to the photon-triplet chain |nnn>."""

    theta: float
    chain_amplitudes: np.ndarray
    leakage: float
    ket: Ket

    def closed_form(self) -> Ket:
        return three_photon_state(self.theta, self.ket.space)

    def support_deviation(self) -> float:
        """Amplitude deviation from the closed form on its span {|000>, |111>}."""
        c = self.chain_amplitudes
        return float(np.hypot(abs(c[0] - np.cos(self.theta)),
                              abs(c[1] + 1j * np.sin(self.theta))))

    def full_deviation(self) -> float:
        """Norm deviation over the whole chain, including multi-photon leak."""
        ref = np.zeros_like(self.chain_amplitudes)
        ref[0] = np.cos(self.theta)
        ref[1] = -1j * np.sin(self.theta)
        return float(np.linalg.norm(self.chain_amplitudes - ref))


def evolve_exact(theta: float, chain_cutoff: int,
                 leak_tol: float = DEFAULT_LEAK_TOL) -> EvolvedState:
    """Evolve |000> under the triple-mode coupling, exactly on the chain.

    On the chain {|nnn>} the coupling is tridiagonal with matrix element
    ``(n+1)^(3/2)`` between |nnn> and the next triplet level; the propagator
    comes from the eigendecomposition of that small real symmetric matrix.
    The population stranded at the top chain level is reported as leakage and
    must stay below ``leak_tol`` (raise the cutoff otherwise).
    """
    if chain_cutoff < 4:
        raise ValueError(f"chain cutoff must be >= 4, got {chain_cutoff}")
    k = np.arange(1, chain_cutoff)
    h = np.zeros((chain_cutoff, chain_cutoff))
    h[k - 1, k] = h[k, k - 1] = k ** 1.5
    evals, evecs = np.linalg.eigh(h)
    amps = evecs @ (np.exp(-1j * theta * evals) * evecs[0, :].conj())
    leakage = float(np.abs(amps[-1]) ** 2)
    if leakage > leak_tol:
        raise TruncationError(
            f"chain leakage {leakage:.3e} above {leak_tol:.1e} at cutoff {chain_cutoff}; "
            "raise the chain cutoff")
    space = build_space(3, (chain_cutoff,) * 3)
    full = np.zeros(space.total_dim, dtype=complex)
    for n in range(chain_cutoff):
        full[space.index_of((n, n, n))] = amps[n]
    norm = np.linalg.norm(full)
    ket = Ket(space, full / norm)
    return EvolvedState(theta, amps, leakage, ket)


def mean_photon_number(ket: Ket, mode: int) -> float:
    """Expectation of the number operator on ``mode``."""
    occ = ket.space.mode_occupations(mode)
    return float(np.sum(np.abs(ket.amplitudes) ** 2 * occ))


# ---------------------------------------------------------------------------
# backgrounds
# ---------------------------------------------------------------------------

def thermal_tail_mass(nbar: float, cutoff: int) -> float:
    """Pre-normalization mass of the truncated thermal tail, (nbar/(nbar+1))^cutoff."""
    return float((nbar / (nbar + 1.0)) ** cutoff)


def thermal_probs(nbar: float, cutoff: int) -> np.ndarray:
    """Renormalized thermal occupation probabilities p_n ~ nbar^n/(nbar+1)^(n+1)."""
    if nbar <= 0:
        raise ValueError(f"nbar must be positive, got {nbar}")
    n = np.arange(cutoff)
    logp = n * math.log(nbar) - (n + 1) * math.log(nbar + 1.0)
    p = np.exp(logp)
    return p / p.sum()


def thermal_state(nbar: float, cutoff: int, tail_bound: float = DEFAULT_TAIL_BOUND,
                  dense_limit: int = DEFAULT_DENSE_LIMIT) -> DensityOperator:
    """Single-mode truncated thermal state, renormalized to unit trace."""
    tail = thermal_tail_mass(nbar, cutoff)
    if tail > tail_bound:
        raise TruncationError(
            f"thermal tail mass {tail:.3e} above bound {tail_bound:.1e}: "
            f"cutoff {cutoff} too small for nbar={nbar}")
    space = build_space(1, (cutoff,), dense_limit)
    return DensityOperator.diagonal(space, thermal_probs(nbar, cutoff))


def auto_cutoff(nbar: float, tail_bound: float = DEFAULT_TAIL_BOUND,
                cap: int = MAX_MODE_CUTOFF) -> int:
    """Smallest cutoff whose thermal tail mass is below the bound."""
    if nbar <= 0:
        raise ValueError(f"nbar must be positive, got {nbar}")
    if not math.isfinite(tail_bound) or tail_bound >= 1.0:
        return 2
    q = nbar / (nbar + 1.0)
    k = max(int(math.floor(math.log(tail_bound) / math.log(q))) + 1, 2)
    while thermal_tail_mass(nbar, k) >= tail_bound:  # absorb log rounding
        k += 1
    if k > cap:
        raise TruncationError(
            f"auto cutoff {k} for nbar={nbar} exceeds the per-mode cap {cap}")
    return k


def flat_levels(nbar: float) -> int:
    """Number of uniformly occupied levels in the flat background, round(nbar)."""
    return max(int(math.floor(nbar + 0.5)), 1)


def flat_probs(nbar: float, cutoff: int) -> np.ndarray:
    k = flat_levels(nbar)
    if cutoff < k:
        raise ValueError(f"flat background needs cutoff >= round(nbar) = {k}, got {cutoff}")
    p = np.zeros(cutoff)
    p[:k] = 1.0 / k
    return p


def background_state(params: ProtocolParams) -> DensityOperator:
    """Two-mode background on the signal modes.

    thermal variant: exact product of truncated thermal states.
    flat variant: uniform diagonal over the first round(nbar) levels per mode,
    the trace-one reading of the high-noise identity-per-nbar approximation.
    """
    _, c1, c2 = params.resolved_cutoffs()
    factors = []
    for nbar, cutoff in ((params.nbar2, c1), (params.nbar3, c2)):
        if params.background == "thermal":
            factors.append(thermal_state(nbar, cutoff, params.tail_bound, params.dense_limit))
        else:
            space = build_space(1, (cutoff,), params.dense_limit)
            factors.append(DensityOperator.diagonal(space, flat_probs(nbar, cutoff)))
    return DensityOperator.product(factors)


# ---------------------------------------------------------------------------
# hypothesis operators
# ---------------------------------------------------------------------------

def idler_ket(theta: float, cutoff: int, dense_limit: int = DEFAULT_DENSE_LIMIT) -> Ket:
    """Single-mode idler state ``cos(theta)|0> - i sin(theta)|1>``."""
    space = build_space(1, (cutoff,), dense_limit)
    amps = np.zeros(cutoff, dtype=complex)
    amps[0] = np.cos(theta)
    amps[1] = -1j * np.sin(theta)
    return Ket(space, amps)


def hypothesis_h0(params: ProtocolParams) -> DensityOperator:
    """Target-absent state: idler factor (pure or traced) times the background."""
    c0, _, _ = params.resolved_cutoffs()
    if params.idler == "paper_pure":
        idler = DensityOperator.from_ket(idler_ket(params.theta, c0, params.dense_limit))
    else:
        probs = np.zeros(c0)
        probs[0] = np.cos(params.theta) ** 2
        probs[1] = np.sin(params.theta) ** 2
        idler = DensityOperator.diagonal(build_space(1, (c0,), params.dense_limit), probs)
    return DensityOperator.product([idler, background_state(params)])


def hypothesis_h1(params: ProtocolParams) -> DensityOperator:
    """Target-present state ``(1 - eta) rho0 + eta |Psi><Psi|``.

    Represented as DiagPlusLowRank over the eigenbasis of the target-absent
    state: the base diagonal is shared with rho0's and only scaled by
    ``1 - eta``, and the triplet projector enters as the single rank-one term.
    """
    h0 = as_diag_plus_low_rank(hypothesis_h0(params))
    space = h0.space
    psi = three_photon_state(params.theta, space)
    v = apply_mode_unitaries(psi.amplitudes, space, h0.structure.mode_rotations, adjoint=True)
    return DensityOperator.diag_plus_low_rank(
        space, h0.structure.diag, 1.0 - params.eta, (params.eta,), v,
        mode_rotations=h0.structure.mode_rotations)


@dataclass(frozen=True)
class HypothesisPair:
    """The two discrimination hypotheses plus the parameters that built them."""

    params: ProtocolParams
    rho0: DensityOperator
    rho1: DensityOperator

    @property
    def rho0_structured(self) -> DensityOperator:
        return as_diag_plus_low_rank(self.rho0)


def build_hypothesis_pair(params: ProtocolParams) -> HypothesisPair:
    return HypothesisPair(params, hypothesis_h0(params), hypothesis_h1(params))
