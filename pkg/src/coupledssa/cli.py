"""Command-line front end: validate network files, run coupled Monte Carlo
experiments, query exact oracles, and dump single-path event records as CSV.

Every CSV-producing command echoes its experiment-defining flags as a
`# args:` comment on the first line so output files carry their provenance.
Flags that cannot change the numbers (--workers, --output) are excluded, so
reruns of the same experiment are byte-identical however they were scheduled
or stored. Exit codes: 0 success, 1 usage or validation failure, 2 runtime
failure.
"""

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from .couplings import (
    Partition,
    SimulationExplosion,
    simulate_crn,
    simulate_crp,
    simulate_independent,
    simulate_local_crp,
    simulate_split,
    uniform_partition,
)
from .estimators import (
    COUPLING_KINDS,
    DEFAULT_GRID_POINTS,
    CouplingSpec,
    sensitivity_fd,
    uniform_grid,
    variance_trajectory,
)
from .model import (
    Network,
    ParseError,
    Perturbation,
    apply_perturbation,
    network_warnings,
    parse_network,
    sample_initial,
)
from .streams import StreamKey, UniformStream

__all__ = ["main", "ExperimentConfig"]


class _CliError(Exception):
    """Internal: message plus the exit code it should produce."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment knobs shared by the simulation commands."""

    network: str
    net_x: Network
    net_z: Network
    perturbation: Perturbation | None
    coupling: str
    partition: Partition | None
    partition_flag: str
    t_final: float
    grid_points: int
    n_paths: int
    observable: int
    observable_name: str
    seed: int
    init_coupling: str
    workers: int
    output: str | None

    def spec(self) -> CouplingSpec:
        return CouplingSpec(self.coupling, self.partition)


def _fmt(v) -> str:
    return repr(float(v))


def _load_network(path: str) -> Network:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise _CliError(1, f"cannot read network file: {e}")
    return parse_network(text)


def _parse_perturb(net: Network, text):
    if text is None:
        return None, net, net
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--perturb expects CHANNEL:RATE_X:RATE_Z, got {text!r}")
    try:
        pert = Perturbation(parts[0], float(parts[1]), float(parts[2]))
    except ValueError as e:
        raise ValueError(f"--perturb: {e}")
    net_x, net_z = apply_perturbation(net, pert)
    return pert, net_x, net_z


def _resolve_observable(net: Network, text):
    if text is None:
        if net.n_species == 1:
            return 0, net.species[0]
        raise ValueError(
            f"--observable is required: network has species {', '.join(net.species)}"
        )
    if text in net.species:
        return net.species.index(text), text
    try:
        i = int(text)
    except ValueError:
        raise ValueError(f"unknown species {text!r}") from None
    if not 0 <= i < net.n_species:
        raise ValueError(f"species index {i} out of range for {net.n_species} species")
    return i, net.species[i]


def _resolve_partition(args, coupling, t_final):
    """Returns (Partition or None, provenance fragment)."""
    has_n = getattr(args, "partition_n", None) is not None
    has_pts = getattr(args, "partition", None) is not None
    if coupling == "local-crp":
        if has_n == has_pts:
            raise ValueError("local-crp requires exactly one of --partition-n / --partition")
        if has_n:
            n = int(args.partition_n)
            if n < 1:
                raise ValueError("--partition-n must be >= 1")
            return uniform_partition(t_final, n), f" --partition-n {n}"
        try:
            pts = np.array([float(tok) for tok in args.partition.split(",")])
        except ValueError:
            raise ValueError(f"--partition must be comma-separated numbers, got {args.partition!r}")
        part = Partition(pts)
        if part.t_final != t_final:
            raise ValueError(
                f"--partition must end at --t-final ({_fmt(t_final)}), ends at {_fmt(part.t_final)}"
            )
        return part, " --partition " + ",".join(_fmt(p) for p in part.points)
    if has_n or has_pts:
        raise ValueError(f"partition flags apply only to local-crp, not {coupling!r}")
    return None, ""


def _experiment_config(args, *, coupling=None) -> ExperimentConfig:
    net = _load_network(args.network)
    pert, net_x, net_z = _parse_perturb(net, args.perturb)
    coupling = coupling if coupling is not None else args.coupling
    t_final = float(args.t_final)
    if not t_final > 0:
        raise ValueError("--t-final must be positive")
    partition, partition_flag = _resolve_partition(args, coupling, t_final)
    grid_points = int(getattr(args, "grid_points", DEFAULT_GRID_POINTS))
    if grid_points < 2:
        raise ValueError("--grid-points must be >= 2")
    if hasattr(args, "observable"):
        obs, obs_name = _resolve_observable(net, args.observable)
    else:
        obs, obs_name = 0, net.species[0]
    init_coupling = args.init_coupling or net.init_coupling
    return ExperimentConfig(
        network=args.network,
        net_x=net_x,
        net_z=net_z,
        perturbation=pert,
        coupling=coupling,
        partition=partition,
        partition_flag=partition_flag,
        t_final=t_final,
        grid_points=grid_points,
        n_paths=int(getattr(args, "n_paths", 1)),
        observable=obs,
        observable_name=obs_name,
        seed=int(args.seed),
        init_coupling=init_coupling,
        workers=int(getattr(args, "workers", 1)),
        output=getattr(args, "output", None),
    )


def _perturb_fragment(cfg: ExperimentConfig) -> str:
    if cfg.perturbation is None:
        return ""
    p = cfg.perturbation
    return f" --perturb {p.channel_id}:{_fmt(p.rate_x)}:{_fmt(p.rate_z)}"


def _write_output(path, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise _CliError(2, f"cannot write output: {e}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        net = _load_network(args.network)
    except ParseError as e:
        for ln, msg in e.diagnostics:
            print(f"{args.network}:{ln}: {msg}", file=sys.stderr)
        return 1
    for w in network_warnings(net):
        print(f"warning: {w}")
    print(
        f"ok: {len(net.species)} species ({', '.join(net.species)}), "
        f"{net.n_channels} reaction channels"
    )
    return 0


def cmd_variance(args) -> int:
    cfg = _experiment_config(args)
    grid = uniform_grid(cfg.t_final, cfg.grid_points)
    series = variance_trajectory(
        cfg.spec(),
        cfg.net_x,
        cfg.net_z,
        grid,
        cfg.n_paths,
        cfg.observable,
        cfg.seed,
        init_coupling=cfg.init_coupling,
        workers=cfg.workers,
    )
    prov = (
        f"# args: variance --network {cfg.network}{_perturb_fragment(cfg)}"
        f" --coupling {cfg.coupling}{cfg.partition_flag}"
        f" --t-final {_fmt(cfg.t_final)} --grid-points {cfg.grid_points}"
        f" --n-paths {cfg.n_paths} --observable {cfg.observable_name}"
        f" --seed {cfg.seed} --init-coupling {cfg.init_coupling}"
    )
    lines = [prov, "t,mean_diff,var_diff,se_mean,se_var,n_paths"]
    for j in range(grid.size):
        lines.append(
            f"{_fmt(series.times[j])},{_fmt(series.mean_diff[j])},{_fmt(series.var_diff[j])},"
            f"{_fmt(series.se_mean[j])},{_fmt(series.se_var[j])},{series.n_paths}"
        )
    _write_output(cfg.output, "\n".join(lines) + "\n")
    return 0


def cmd_sensitivity(args) -> int:
    couplings = [tok.strip() for tok in args.couplings.split(",") if tok.strip()]
    if not couplings:
        raise ValueError("--couplings must name at least one coupling")
    cfg_kind = "local-crp" if "local-crp" in couplings else couplings[0]
    cfg = _experiment_config(args, coupling=cfg_kind)
    if cfg.perturbation is None:
        raise ValueError("sensitivity requires --perturb CHANNEL:RATE_X:RATE_Z")
    spread = cfg.perturbation.spread
    if not spread > 0:
        raise ValueError(
            "sensitivity requires rate_x > rate_z (the X side carries the larger parameter)"
        )
    rows = []
    for kind in couplings:
        partition = cfg.partition if kind == "local-crp" else None
        est, se = sensitivity_fd(
            CouplingSpec(kind, partition),
            cfg.net_x,
            cfg.net_z,
            spread,
            cfg.t_final,
            cfg.n_paths,
            cfg.observable,
            cfg.seed,
            init_coupling=cfg.init_coupling,
            workers=cfg.workers,
        )
        rows.append(f"{kind},{_fmt(est)},{_fmt(se)},{cfg.n_paths}")
    prov = (
        f"# args: sensitivity --network {cfg.network}{_perturb_fragment(cfg)}"
        f" --couplings {','.join(couplings)}{cfg.partition_flag}"
        f" --t-final {_fmt(cfg.t_final)} --n-paths {cfg.n_paths}"
        f" --observable {cfg.observable_name} --seed {cfg.seed}"
        f" --init-coupling {cfg.init_coupling}"
    )
    lines = [prov, "coupling,estimate,se,n_paths"] + rows
    _write_output(cfg.output, "\n".join(lines) + "\n")
    return 0


def cmd_oracle(args) -> int:
    from . import oracle

    net = _load_network(args.network)
    t = float(args.t_final)
    if t < 0:
        raise ValueError("--t-final must be >= 0")
    obs, _ = _resolve_observable(net, args.observable)
    if args.affine == (args.bounds is not None):
        raise ValueError("oracle requires exactly one of --affine / --bounds")
    if args.affine:
        x0 = np.array([float(v) for _, v in net.init])
        means = oracle.moment_ode_mean(net, x0, t)
        print(f"value {_fmt(means[obs])}")
        return 0
    try:
        bounds = tuple(int(tok) for tok in args.bounds.split(","))
    except ValueError:
        raise ValueError(f"--bounds must be comma-separated integers, got {args.bounds!r}")
    if len(bounds) != net.n_species:
        raise ValueError(f"--bounds needs one bound per species ({net.n_species})")
    space = oracle.TruncatedSpace(bounds)
    gen = oracle.build_generator(net, space)
    init = oracle.initial_distribution(net, space)
    dist, leak = oracle.transient_distribution(gen, init, t)
    value = float(dist @ space.all_states()[:, obs].astype(np.float64))
    print(f"value {_fmt(value)}")
    print(f"leak_proxy {_fmt(leak)}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _experiment_config(args)
    path_index = int(args.path_index)
    if path_index < 0:
        raise ValueError("--path-index must be >= 0")
    rng = UniformStream(StreamKey(cfg.seed, path_index, "init"))
    x0, z0 = sample_initial(cfg.net_x, mode=cfg.init_coupling, rng=rng)
    key = (cfg.seed, path_index)
    if cfg.coupling == "independent":
        path = simulate_independent(cfg.net_x, cfg.net_z, x0, z0, cfg.t_final, key)
    elif cfg.coupling == "crn":
        path = simulate_crn(cfg.net_x, cfg.net_z, x0, z0, cfg.t_final, key)
    elif cfg.coupling == "crp":
        path = simulate_crp(cfg.net_x, cfg.net_z, x0, z0, cfg.t_final, key)
    elif cfg.coupling == "local-crp":
        path = simulate_local_crp(cfg.net_x, cfg.net_z, x0, z0, cfg.partition, key)
    else:
        path = simulate_split(cfg.net_x, cfg.net_z, x0, z0, cfg.t_final, key)
    prov = (
        f"# args: simulate --network {cfg.network}{_perturb_fragment(cfg)}"
        f" --coupling {cfg.coupling}{cfg.partition_flag}"
        f" --t-final {_fmt(cfg.t_final)} --seed {cfg.seed}"
        f" --path-index {path_index} --init-coupling {cfg.init_coupling}"
    )
    species = cfg.net_x.species
    header = (
        "t,which,channel,"
        + ",".join(f"x_{sp}" for sp in species)
        + ","
        + ",".join(f"z_{sp}" for sp in species)
    )
    lines = [prov, header]
    ids = [ch.id for ch in cfg.net_x.channels]
    for j in range(path.n_events):
        sx = ",".join(str(v) for v in path.states_x[j])
        sz = ",".join(str(v) for v in path.states_z[j])
        lines.append(f"{_fmt(path.times[j])},{int(path.which[j])},{ids[path.channels[j]]},{sx},{sz}")
    _write_output(cfg.output, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p, *, perturb=True, coupling=True, partition=True, seed=True):
    p.add_argument("--network", required=True, help="reaction network file")
    if perturb:
        p.add_argument("--perturb", metavar="CHANNEL:RATE_X:RATE_Z", help="per-side rate override for one channel")
    if coupling:
        p.add_argument("--coupling", choices=COUPLING_KINDS, default="split")
    if partition:
        p.add_argument("--partition-n", type=int, metavar="N", help="uniform partition of [0, t-final] into N intervals (local-crp)")
        p.add_argument("--partition", metavar="P0,P1,...", help="explicit partition points (local-crp)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--init-coupling", choices=("shared", "independent"), default=None, help="override the pair's initial-state sampling mode")
    p.add_argument("--output", metavar="PATH", help="write to file instead of stdout")


def _build_parser() -> _Parser:
    parser = _Parser(prog="coupledssa", description="Coupled exact simulation and Monte Carlo estimation for reaction networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="parse a network file and report diagnostics")
    pv.add_argument("network", help="reaction network file")
    pv.set_defaults(func=cmd_validate)

    pr = sub.add_parser("variance", help="variance trajectory of the coupled difference")
    _add_common(pr)
    pr.add_argument("--t-final", type=float, required=True)
    pr.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS)
    pr.add_argument("--n-paths", type=int, required=True)
    pr.add_argument("--observable", help="species name or index (default: the sole species)")
    pr.add_argument("--workers", type=int, default=1)
    pr.set_defaults(func=cmd_variance)

    ps = sub.add_parser("sensitivity", help="finite-difference sensitivity table across couplings")
    _add_common(ps, coupling=False)
    ps.add_argument("--couplings", default="independent,crn,crp,split", help="comma-separated list of couplings")
    ps.add_argument("--t-final", type=float, required=True)
    ps.add_argument("--n-paths", type=int, required=True)
    ps.add_argument("--observable", help="species name or index (default: the sole species)")
    ps.add_argument("--workers", type=int, default=1)
    ps.set_defaults(func=cmd_sensitivity)

    po = sub.add_parser("oracle", help="exact transient expectation (uniformization or affine moment ODE)")
    po.add_argument("--network", required=True)
    po.add_argument("--t-final", type=float, required=True)
    po.add_argument("--affine", action="store_true", help="use the affine moment ODE")
    po.add_argument("--bounds", metavar="B0,B1,...", help="per-species truncation bounds for uniformization")
    po.add_argument("--observable", help="species name or index (default: the sole species)")
    po.set_defaults(func=cmd_oracle)

    pm = sub.add_parser("simulate", help="dump one coupled path's events as CSV")
    _add_common(pm)
    pm.add_argument("--t-final", type=float, required=True)
    pm.add_argument("--path-index", type=int, default=0)
    pm.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SimulationExplosion as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
