"""Reaction network model: species, channels, mass-action intensities, file format.

A network is a list of named species with integer copy numbers and a list of
reaction channels. Each channel consumes its reactant multiset, produces its
product multiset, and fires with mass-action intensity

    c * prod_i  x_i (x_i - 1) ... (x_i - m_i + 1)

where m_i is the reactant multiplicity of species i. Note there is no
division by m_i!: a dimerization channel ``2 A -> 0`` with rate constant c
fires at c x (x - 1), not (c/2) x (x - 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

__all__ = [
    "ReactionChannel",
    "Network",
    "Perturbation",
    "ParseError",
    "parse_network",
    "serialize_network",
    "network_warnings",
    "intensity",
    "apply_perturbation",
    "sample_initial",
]

_NAME_CHARS = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_0123456789"


def _is_name(tok: str) -> bool:
    return tok[0].isalpha() or tok[0] == "_"


class ParseError(ValueError):
    """Raised by parse_network; carries every diagnostic found, with line numbers."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        msg = "; ".join(f"line {ln}: {m}" for ln, m in self.diagnostics)
        super().__init__(msg or "parse error")


@dataclass(frozen=True)
class ReactionChannel:
    """One reaction channel: reactant/product multiplicities per species.

    reactants and products are tuples aligned with the owning Network's
    species order. net_change is products - reactants.
    """

    id: str
    reactants: tuple
    products: tuple
    rate_constant: float

    def __post_init__(self):
        if len(self.reactants) != len(self.products):
            raise ValueError(
                f"channel {self.id!r}: reactant/product vectors differ in length"
            )
        if any(m < 0 for m in self.reactants) or any(m < 0 for m in self.products):
            raise ValueError(f"channel {self.id!r}: negative multiplicity")
        if not (self.rate_constant >= 0.0) or not math.isfinite(self.rate_constant):
            raise ValueError(
                f"channel {self.id!r}: rate constant must be finite and >= 0, "
                f"got {self.rate_constant}"
            )

    @property
    def net_change(self):
        return tuple(p - r for r, p in zip(self.reactants, self.products))


@dataclass(frozen=True)
class Network:
    """Immutable reaction network.

    init holds one ("fixed", count) or ("poisson", mean) entry per species.
    init_coupling ("shared" or "independent") says whether a coupled pair of
    processes draws one common initial state or two independent ones; it is a
    default that samplers may override.
    """

    species: tuple
    channels: tuple
    init: tuple
    init_coupling: str = "shared"

    def __post_init__(self):
        if not self.species:
            raise ValueError("network has no species")
        if len(set(self.species)) != len(self.species):
            raise ValueError("duplicate species names")
        if len(self.init) != len(self.species):
            raise ValueError("init must have one entry per species")
        ids = [ch.id for ch in self.channels]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate channel ids")
        d = len(self.species)
        for ch in self.channels:
            if len(ch.reactants) != d:
                raise ValueError(f"channel {ch.id!r} sized for {len(ch.reactants)} species, network has {d}")
        for sp, (kind, value) in zip(self.species, self.init):
            if kind == "fixed":
                if value < 0 or value != int(value):
                    raise ValueError(f"init {sp}: fixed count must be a nonnegative integer")
            elif kind == "poisson":
                if not (value >= 0.0) or not math.isfinite(value):
                    raise ValueError(f"init {sp}: poisson mean must be finite and >= 0")
            else:
                raise ValueError(f"init {sp}: unknown kind {kind!r}")
        if self.init_coupling not in ("shared", "independent"):
            raise ValueError(f"init_coupling must be 'shared' or 'independent', got {self.init_coupling!r}")

    @property
    def n_species(self):
        return len(self.species)

    @property
    def n_channels(self):
        return len(self.channels)

    def species_index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ValueError(f"unknown species {name!r}") from None

    def channel_index(self, channel_id: str) -> int:
        for k, ch in enumerate(self.channels):
            if ch.id == channel_id:
                return k
        raise ValueError(f"unknown channel {channel_id!r}")

    # dense views used by the simulation kernels and the oracle
    @cached_property
    def reactant_matrix(self):
        return np.array([ch.reactants for ch in self.channels], dtype=np.int64).reshape(
            self.n_channels, self.n_species
        )

    @cached_property
    def change_matrix(self):
        return np.array([ch.net_change for ch in self.channels], dtype=np.int64).reshape(
            self.n_channels, self.n_species
        )

    @cached_property
    def rate_constants(self):
        return np.array([ch.rate_constant for ch in self.channels], dtype=np.float64)

    @cached_property
    def init_mean(self):
        """Mean initial state (equals the fixed counts for deterministic inits)."""
        return np.array([v for _, v in self.init], dtype=np.float64)


@dataclass(frozen=True)
class Perturbation:
    """Replaces the rate constant of one channel with distinct values per side.

    The convention throughout is that the X process carries rate_x and the Z
    process carries rate_z; finite-difference estimates divide by
    spread = rate_x - rate_z.
    """

    channel_id: str
    rate_x: float
    rate_z: float

    @property
    def spread(self):
        return self.rate_x - self.rate_z


def intensity(channel: ReactionChannel, x) -> float:
    """Mass-action intensity of one channel at state x.

    Falling-factorial form without the 1/m! combinatorial factor. The factor
    order (species ascending, offsets 0..m-1) is fixed; it is part of the
    reproducibility contract shared with the jitted simulation loops.
    """
    v = channel.rate_constant
    for i, m in enumerate(channel.reactants):
        if m:
            xi = x[i]
            if xi < m:
                return 0.0
            for j in range(m):
                v *= xi - j
    return float(v)


def apply_perturbation(net: Network, pert: Perturbation):
    """Return (net_x, net_z): copies of net with the named channel's rate replaced."""
    k = net.channel_index(pert.channel_id)
    if pert.rate_x < 0 or pert.rate_z < 0:
        raise ValueError("perturbed rate constants must be >= 0")

    def with_rate(c):
        chans = list(net.channels)
        chans[k] = replace(chans[k], rate_constant=float(c))
        return replace(net, channels=tuple(chans))

    return with_rate(pert.rate_x), with_rate(pert.rate_z)


def poisson_inverse_cdf(mean: float, u: float) -> int:
    """Smallest k with P(Poisson(mean) <= k) > u. Exact inversion, used so that
    initial-state draws are a pure function of the owning uniform stream."""
    if mean <= 0.0:
        return 0
    p = math.exp(-mean)
    cdf = p
    k = 0
    while u >= cdf:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0:  # underflow guard; cdf can no longer grow
            break
    return k


def sample_initial(net: Network, mode=None, rng=None):
    """Draw the coupled pair's initial states (x0, z0) as int64 vectors.

    mode "shared" draws one value per species used by both sides; mode
    "independent" draws separate values. Uniform draws come from rng
    (a UniformStream): species i consumes index i when shared, indices
    (2i, 2i+1) when independent, so layouts are reproducible.
    """
    if mode is None:
        mode = net.init_coupling
    if mode not in ("shared", "independent"):
        raise ValueError(f"mode must be 'shared' or 'independent', got {mode!r}")
    if rng is None:
        raise ValueError("sample_initial requires a uniform stream")
    d = net.n_species
    x0 = np.zeros(d, dtype=np.int64)
    z0 = np.zeros(d, dtype=np.int64)
    for i, (kind, value) in enumerate(net.init):
        if kind == "fixed":
            x0[i] = int(value)
            z0[i] = int(value)
        elif mode == "shared":
            x0[i] = z0[i] = poisson_inverse_cdf(value, rng.uniform_at(i))
        else:
            x0[i] = poisson_inverse_cdf(value, rng.uniform_at(2 * i))
            z0[i] = poisson_inverse_cdf(value, rng.uniform_at(2 * i + 1))
    return x0, z0


# ---------------------------------------------------------------------------
# network file format
#
#   species NAME [NAME ...]
#   init NAME (INT | poisson(FLOAT))        # unspecified init defaults to 0
#   reaction NAME : complex -> complex rate FLOAT
#   complex := "0" | term ("+" term)*       # term := [INT] NAME, default 1
#
# '#' starts a comment. Blank lines are ignored.
# ---------------------------------------------------------------------------

import re

_TOKEN_RE = re.compile(
    r"->|[():+]|[A-Za-z_][A-Za-z0-9_]*|-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|\S"
)


def _tokens(line: str):
    return _TOKEN_RE.findall(line)


def _parse_complex(toks, lineno, species_idx, errors):
    """Parse a reactant or product token list into a multiplicity vector."""
    counts = {}
    if toks == ["0"]:
        return counts
    expect_term = True
    i = 0
    while i < len(toks):
        tok = toks[i]
        if expect_term:
            mult = 1
            if not _is_name(tok):
                try:
                    mult = int(tok)
                except ValueError:
                    errors.append((lineno, f"expected species term, got {tok!r}"))
                    return counts
                if mult <= 0:
                    errors.append((lineno, f"multiplicity must be positive, got {mult}"))
                    return counts
                i += 1
                if i >= len(toks):
                    errors.append((lineno, "dangling multiplicity"))
                    return counts
                tok = toks[i]
            if not _is_name(tok):
                errors.append((lineno, f"expected species name, got {tok!r}"))
                return counts
            if tok not in species_idx:
                errors.append((lineno, f"unknown species {tok!r}"))
            else:
                counts[species_idx[tok]] = counts.get(species_idx[tok], 0) + mult
            expect_term = False
        else:
            if tok != "+":
                errors.append((lineno, f"expected '+', got {tok!r}"))
                return counts
            expect_term = True
        i += 1
    if expect_term:
        errors.append((lineno, "complex ends with '+'"))
    return counts


def parse_network(text: str) -> Network:
    """Parse the network file format. Raises ParseError carrying every
    diagnostic (with 1-based line numbers) rather than stopping at the first."""
    species = []
    species_idx = {}
    inits = {}
    raw_reactions = []  # (lineno, id, toks)
    channel_ids = set()
    errors = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = _tokens(line)
        head = toks[0]
        if head == "species":
            if len(toks) < 2:
                errors.append((lineno, "species line names no species"))
            for tok in toks[1:]:
                if not _is_name(tok):
                    errors.append((lineno, f"bad species name {tok!r}"))
                elif tok in species_idx:
                    errors.append((lineno, f"duplicate species {tok!r}"))
                else:
                    species_idx[tok] = len(species)
                    species.append(tok)
        elif head == "init":
            if len(toks) < 3:
                errors.append((lineno, "init needs a species and a value"))
                continue
            name = toks[1]
            if name not in species_idx:
                errors.append((lineno, f"unknown species {name!r}"))
                continue
            if name in inits:
                errors.append((lineno, f"duplicate init for {name!r}"))
                continue
            if toks[2] == "poisson":
                if len(toks) != 6 or toks[3] != "(" or toks[5] != ")":
                    errors.append((lineno, "expected poisson(MEAN)"))
                    continue
                try:
                    mean = float(toks[4])
                except ValueError:
                    errors.append((lineno, f"bad poisson mean {toks[4]!r}"))
                    continue
                if mean < 0:
                    errors.append((lineno, "poisson mean must be >= 0"))
                    continue
                inits[name] = ("poisson", mean)
            else:
                try:
                    count = int(toks[2])
                except ValueError:
                    errors.append((lineno, f"bad init count {toks[2]!r}"))
                    continue
                if count < 0:
                    errors.append((lineno, "init count must be >= 0"))
                    continue
                if len(toks) != 3:
                    errors.append((lineno, "trailing tokens after init count"))
                    continue
                inits[name] = ("fixed", count)
        elif head == "reaction":
            if len(toks) < 3 or not _is_name(toks[1]) or toks[2] != ":":
                errors.append((lineno, "expected 'reaction NAME :'"))
                continue
            rid = toks[1]
            if rid in channel_ids:
                errors.append((lineno, f"duplicate reaction id {rid!r}"))
                continue
            channel_ids.add(rid)
            raw_reactions.append((lineno, rid, toks[3:]))
        else:
            errors.append((lineno, f"unknown directive {head!r}"))

    if not species:
        errors.insert(0, (0, "no species declared"))
        raise ParseError(errors)

    channels = []
    d = len(species)
    for lineno, rid, toks in raw_reactions:
        if "->" not in toks:
            errors.append((lineno, "reaction needs '->'"))
            continue
        arrow = toks.index("->")
        if "rate" not in toks[arrow:]:
            errors.append((lineno, "reaction needs 'rate FLOAT'"))
            continue
        rate_pos = arrow + toks[arrow:].index("rate")
        if rate_pos != len(toks) - 2:
            errors.append((lineno, "expected exactly one value after 'rate'"))
            continue
        try:
            rate = float(toks[-1])
        except ValueError:
            errors.append((lineno, f"bad rate {toks[-1]!r}"))
            continue
        if rate < 0:
            errors.append((lineno, f"negative rate {rate}"))
            continue
        lhs = _parse_complex(toks[:arrow], lineno, species_idx, errors)
        rhs = _parse_complex(toks[arrow + 1 : rate_pos], lineno, species_idx, errors)
        reac = tuple(lhs.get(i, 0) for i in range(d))
        prod = tuple(rhs.get(i, 0) for i in range(d))
        channels.append(ReactionChannel(rid, reac, prod, rate))

    if errors:
        raise ParseError(errors)

    init = tuple(inits.get(sp, ("fixed", 0)) for sp in species)
    net = Network(tuple(species), tuple(channels), init)
    for w in network_warnings(net):
        warnings.warn(w, stacklevel=2)
    return net


def network_warnings(net: Network):
    """Non-fatal findings: currently channels whose firing changes nothing."""
    out = []
    for ch in net.channels:
        if all(v == 0 for v in ch.net_change):
            out.append(f"channel {ch.id!r} has zero net change (no-op)")
    return out


def _fmt_complex(counts) -> str:
    terms = []
    for name, m in counts:
        if m == 0:
            continue
        terms.append(name if m == 1 else f"{m} {name}")
    return " + ".join(terms) if terms else "0"


def serialize_network(net: Network) -> str:
    """Canonical text form; parse_network(serialize_network(net)) reproduces net
    field-for-field (init_coupling is not part of the file format)."""
    lines = ["species " + " ".join(net.species)]
    for sp, (kind, value) in zip(net.species, net.init):
        if kind == "fixed":
            lines.append(f"init {sp} {int(value)}")
        else:
            lines.append(f"init {sp} poisson({value!r})")
    for ch in net.channels:
        lhs = _fmt_complex(zip(net.species, ch.reactants))
        rhs = _fmt_complex(zip(net.species, ch.products))
        lines.append(f"reaction {ch.id}: {lhs} -> {rhs} rate {ch.rate_constant!r}")
    return "\n".join(lines) + "\n"
