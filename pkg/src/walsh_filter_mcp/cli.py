"""walsh-filter command line: build, evaluate, cost, fit, optimize, map, shape
and simulate control sequences."""

import csv
import io
import json
import logging
import math
import sys
import warnings
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any, Optional

import numpy as np
import typer
from pydantic import ValidationError

from .catalog import amplitude_spectrum, build, sequence_record
from .config import (
    CatalogSpec,
    ExperimentSpec,
    GridSpec,
    RunConfig,
    load_json,
    parse_params,
    parse_range,
)
from .control import ControlSequence
from .errors import (
    NoSignChangeError,
    OptimizationError,
    SpecError,
    StepSizeWarning,
    WalshFilterError,
)
from .filters import Quadrature, filter_functions
from .optimize import (
    cost_map,
    find_c2_zero,
    find_first_order_zero,
    optimize_family,
    optimize_order,
    root_record,
)
from .shaping import ShapedWaveform, Shape, butterworth_sequence, parse_shape
from .simulate import ensemble_infidelity
from .spectral import (
    DEFAULT_POINTS_PER_DECADE,
    CostBand,
    cost_record,
    filter_order,
    predicted_infidelity,
)

logger: logging.Logger = logging.getLogger(__name__)

EXIT_SPEC: int = 2
EXIT_NUMERIC: int = 3
EXIT_NO_IMPROVEMENT: int = 4
DEFAULT_GRID: str = "1e-9:1e-1:200"

app = typer.Typer(
    name="walsh-filter",
    help="Walsh-synthesized qubit control sequences and their filter-transfer functions.",
    no_args_is_help=True,
    add_completion=False,
)

Family = Annotated[
    Optional[str], typer.Option("--family", "-f", help="Catalog family, e.g. wamf03")
]
Params = Annotated[
    str, typer.Option("--params", "-p", help="Family parameters, e.g. X0=3pi,X3=pi")
]
Tau = Annotated[float, typer.Option("--tau", help="Total sequence duration")]
Spec = Annotated[
    Optional[str],
    typer.Option("--spec", help="Inline JSON or a JSON file: a catalog spec or a segment table"),
]
Output = Annotated[
    Optional[Path], typer.Option("--output", "-o", help="Write the result here instead of stdout")
]
Band = Annotated[str, typer.Option("--band", help="low:high in units of 1/tau")]
Threads = Annotated[int, typer.Option("--threads", min=1, help="Worker threads")]


@app.callback()
def _configure(
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Log debug detail to stderr")
    ] = False,
) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _fail(exc: BaseException, code: int) -> None:
    typer.echo(f"Error: {exc}", err=True)
    raise typer.Exit(code)


@contextmanager
def _handled() -> Iterator[None]:
    """Map domain failures onto exit codes 2 (spec), 3 (numeric) and 4 (no improvement)."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", StepSizeWarning)
            yield
    except OptimizationError as exc:
        _fail(exc, EXIT_NO_IMPROVEMENT)
    except (NoSignChangeError, StepSizeWarning, FloatingPointError) as exc:
        _fail(exc, EXIT_NUMERIC)
    except (ValidationError, WalshFilterError) as exc:
        _fail(exc, EXIT_SPEC)


def _echo_config(config: RunConfig) -> None:
    typer.echo(config.to_json(), err=True)


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        typer.echo(text, nl=False)
        return
    output.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", output)


def _load_sequence(
    family: str | None, params: str, tau: float, spec: str | None
) -> tuple[ControlSequence, dict[str, Any]]:
    """Sequence from --spec JSON or from --family/--params, with its resolved spec."""
    if spec is not None:
        data: Any = load_json(spec)
        if isinstance(data, dict) and "family" in data:
            catalog: CatalogSpec = CatalogSpec.model_validate(data)
            return build(catalog), catalog.model_dump()
        rows: Any = data.get("segments") if isinstance(data, dict) else data
        if not isinstance(rows, list):
            raise SpecError(
                "Segment table must be a list of {omega, tau, phi} rows", key="segments"
            )
        duration: float = float(data.get("tau", tau)) if isinstance(data, dict) else tau
        seq: ControlSequence = ControlSequence.from_table(rows, duration, label="table")
        return seq, {"segments": seq.to_table(), "tau": duration}
    if family is None:
        raise SpecError("Give --family (with --params) or --spec", key="family")
    catalog = CatalogSpec.model_validate({"family": family, "params": params, "tau": tau})
    return build(catalog), catalog.model_dump()


def _band(text: str, tau: float, quadrature: Quadrature, ppd: int) -> CostBand:
    low, high = parse_range(text, 2)
    return CostBand(low / tau, high / tau, quadrature, ppd)


def _quadratures(text: str) -> list[Quadrature]:
    if text == "both":
        return [Quadrature.DEPHASING, Quadrature.AMPLITUDE]
    try:
        return [Quadrature(text)]
    except ValueError as exc:
        raise SpecError(f"Unknown quadrature '{text}', expected z, omega or both", key="quadrature") from exc


@app.command("catalog")
def cmd_catalog(
    family: Family = None,
    params: Params = "",
    tau: Tau = 1.0,
    spec: Spec = None,
    output: Output = None,
) -> None:
    """Construct a catalog sequence and print its segment table as JSON."""
    with _handled():
        seq, resolved = _load_sequence(family, params, tau, spec)
        _echo_config(RunConfig(command="catalog", spec=resolved, output=_path(output)))
        _emit(json.dumps(sequence_record(seq), indent=2) + "\n", output)


@app.command("eval")
def cmd_eval(
    family: Family = None,
    params: Params = "",
    tau: Tau = 1.0,
    spec: Spec = None,
    grid: Annotated[
        str, typer.Option("--grid", help="omega_min:omega_max:points_per_decade in units of 1/tau")
    ] = DEFAULT_GRID,
    threads: Threads = 1,
    output: Output = None,
) -> None:
    """Evaluate F_z and F_Omega on a log grid and write them as CSV."""
    with _handled():
        seq, resolved = _load_sequence(family, params, tau, spec)
        grid_spec: GridSpec = GridSpec.parse(grid)
        _echo_config(
            RunConfig(
                command="eval",
                spec=resolved,
                output=_path(output),
                grid=grid_spec,
                threads=threads,
            )
        )
        samples = filter_functions(seq, grid_spec.grid() / seq.duration, threads)
        _emit(samples.to_csv(), output)


@app.command("cost")
def cmd_cost(
    family: Family = None,
    params: Params = "",
    tau: Tau = 1.0,
    spec: Spec = None,
    band: Band = "1e-9:1e-1",
    quadrature: Annotated[str, typer.Option("--quadrature", "-q", help="z, omega or both")] = "both",
    points_per_decade: Annotated[int, typer.Option("--ppd")] = DEFAULT_POINTS_PER_DECADE,
    threads: Threads = 1,
    output: Output = None,
) -> None:
    """Integrate the filter functions over a stopband."""
    with _handled():
        seq, resolved = _load_sequence(family, params, tau, spec)
        _echo_config(
            RunConfig(
                command="cost",
                spec=resolved,
                output=_path(output),
                threads=threads,
                options={"band": band, "quadrature": quadrature, "points_per_decade": points_per_decade},
            )
        )
        records = [
            cost_record(seq, _band(band, seq.duration, q, points_per_decade), threads)
            for q in _quadratures(quadrature)
        ]
        _emit(json.dumps(records, indent=2) + "\n", output)


@app.command("order")
def cmd_order(
    family: Family = None,
    params: Params = "",
    tau: Tau = 1.0,
    spec: Spec = None,
    band: Band = "1e-9:1e-6",
    quadrature: Annotated[str, typer.Option("--quadrature", "-q", help="z, omega or both")] = "both",
    output: Output = None,
) -> None:
    """Fit the log-log slope of the filter functions over a band."""
    with _handled():
        seq, resolved = _load_sequence(family, params, tau, spec)
        low, high = parse_range(band, 2)
        _echo_config(
            RunConfig(
                command="order",
                spec=resolved,
                output=_path(output),
                options={"band": band, "quadrature": quadrature},
            )
        )
        records = [
            filter_order(seq, q, (low / seq.duration, high / seq.duration)).to_record()
            for q in _quadratures(quadrature)
        ]
        _emit(json.dumps(records, indent=2) + "\n", output)


@app.command("optimize")
def cmd_optimize(
    family: Annotated[str, typer.Option("--family", "-f")] = "wamf03",
    fixed: Annotated[str, typer.Option("--fixed", help="Fixed amplitudes, e.g. X0=3pi")] = "",
    variational: Annotated[
        str, typer.Option("--variational", help="Variational amplitudes with seed values, e.g. X3=pi")
    ] = "",
    method: Annotated[
        str, typer.Option("--method", help="nelder-mead (band cost), moments (target order) or bisect")
    ] = "nelder-mead",
    order: Annotated[int, typer.Option("--order", min=1, help="Target filter order for --method moments")] = 2,
    bracket: Annotated[str, typer.Option("--bracket", help="low:high for bisect")] = "0.5pi:1.5pi",
    band: Band = "1e-2:1",
    tau: Tau = 1.0,
    restarts: Annotated[int, typer.Option("--restarts", min=0)] = 3,
    seed: Annotated[int, typer.Option("--seed")] = 0,
    output: Output = None,
) -> None:
    """Tune variational Walsh amplitudes: root finding, a band-cost search or a moment-nulling order search."""
    with _handled():
        fixed_params: dict[str, float] = parse_params(fixed)
        variational_params: dict[str, float] = _variational(variational)
        _echo_config(
            RunConfig(
                command="optimize",
                spec={"family": family, "fixed": fixed_params, "variational": variational_params, "tau": tau},
                output=_path(output),
                seed=seed,
                options={
                    "method": method,
                    "order": order,
                    "bracket": bracket,
                    "band": band,
                    "restarts": restarts,
                },
            )
        )
        if not variational_params:
            raise SpecError("Empty variational set: nothing to optimize", key="variational")
        cost_band: CostBand = _band(band, tau, Quadrature.DEPHASING, DEFAULT_POINTS_PER_DECADE)
        if method == "bisect":
            result: Any = _root(family, fixed_params, variational_params, bracket, tau, cost_band)
        elif method == "nelder-mead":
            result = optimize_family(
                family,
                fixed_params,
                variational_params,
                cost_band,
                tau=tau,
                restarts=restarts,
                seed=seed,
            ).to_record()
        elif method == "moments":
            result = optimize_order(
                family,
                fixed_params,
                variational_params,
                cost_band,
                order=order,
                tau=tau,
                restarts=restarts,
                seed=seed,
            ).to_record()
        else:
            raise SpecError(
                f"Unknown method '{method}', expected nelder-mead, moments or bisect", key="method"
            )
        _emit(json.dumps(result, indent=2) + "\n", output)


def _variational(text: str) -> dict[str, float]:
    """Names with optional seed values; a bare name seeds at zero."""
    items: list[str] = [p.strip() for p in text.split(",") if p.strip()]
    bare: list[str] = [p for p in items if "=" not in p]
    values: dict[str, float] = parse_params(",".join(p for p in items if "=" in p))
    return {**{name: 0.0 for name in bare}, **values}


def _root(
    family: str,
    fixed: dict[str, float],
    variational: dict[str, float],
    bracket: str,
    tau: float,
    band: CostBand,
) -> Any:
    if len(variational) != 1:
        raise SpecError(
            f"Bisection tunes exactly one parameter, got {sorted(variational)}", key="variational"
        )
    name: str = next(iter(variational))
    low, high = parse_range(bracket, 2)

    def make(x: float) -> ControlSequence:
        return build(CatalogSpec(family=family, params={**fixed, name: x}, tau=tau))

    if family == "wamf03" and name == "X3" and "X0" in fixed:
        value: float = find_c2_zero(fixed["X0"], (low, high))
    else:
        value = find_first_order_zero(make, (low, high))
    return root_record(family, name, value, (low, high), make(value), band)


@app.command("map")
def cmd_map(
    family: Annotated[str, typer.Option("--family", "-f")] = "wamf03",
    fixed: Annotated[str, typer.Option("--fixed")] = "",
    x_axis: Annotated[str, typer.Option("--x", help="name=low:high:count, e.g. X0=2pi:4pi:41")] = "X0=2pi:4pi:41",
    y_axis: Annotated[str, typer.Option("--y", help="name=low:high:count")] = "X3=0:2pi:41",
    band: Band = "1e-2:1",
    quadrature: Annotated[str, typer.Option("--quadrature", "-q")] = "z",
    tau: Tau = 1.0,
    threads: Threads = 1,
    output: Output = None,
) -> None:
    """Write log10 A over a two-parameter grid as a CSV matrix."""
    with _handled():
        x_name, xs = _axis(x_axis)
        y_name, ys = _axis(y_axis)
        (q,) = _quadratures(quadrature)
        _echo_config(
            RunConfig(
                command="map",
                spec={"family": family, "fixed": parse_params(fixed), "tau": tau},
                output=_path(output),
                threads=threads,
                options={"x": x_axis, "y": y_axis, "band": band, "quadrature": quadrature},
            )
        )
        result = cost_map(
            family,
            parse_params(fixed),
            (x_name, xs),
            (y_name, ys),
            _band(band, tau, q, DEFAULT_POINTS_PER_DECADE),
            tau=tau,
            threads=threads,
        )
        _emit(result.to_csv(), output)


def _axis(text: str) -> tuple[str, np.ndarray]:
    name, sep, rest = text.partition("=")
    if not sep or not name.strip():
        raise SpecError(f"Axis '{text}' is not of the form name=low:high:count", key=text)
    low, high, count = parse_range(rest, 3)
    if count != int(count) or count < 1:
        raise SpecError(f"Axis point count must be a positive integer, got {count}", key=name.strip())
    return name.strip(), np.linspace(low, high, int(count))


@app.command("shape")
def cmd_shape(
    family: Family = None,
    params: Params = "",
    tau: Tau = 1.0,
    spec: Spec = None,
    shape: Annotated[
        str,
        typer.Option("--shape", help="square, gaussian:g=1/6, trapezoid:F=0.992 or butterworth:fc=0.1"),
    ] = "square",
    substeps: Annotated[int, typer.Option("--substeps", help="Sub-segments per segment")] = 100,
    samples: Annotated[int, typer.Option("--samples", help="Butterworth envelope samples")] = 2048,
    grid: Annotated[str, typer.Option("--grid")] = DEFAULT_GRID,
    table: Annotated[bool, typer.Option("--table", help="Emit the segment table instead of filter CSV")] = False,
    output: Output = None,
) -> None:
    """Reshape a square Walsh sequence and evaluate the shaped filter functions."""
    with _handled():
        name, parameter = parse_shape(shape)
        seq, resolved = _load_sequence(family, params, tau, spec)
        grid_spec: GridSpec = GridSpec.parse(grid)
        _echo_config(
            RunConfig(
                command="shape",
                spec=resolved,
                output=_path(output),
                grid=grid_spec,
                options={"shape": name, "parameter": parameter, "substeps": substeps, "samples": samples},
            )
        )
        if name == "butterworth":
            shaped: ControlSequence = butterworth_sequence(seq, float(parameter), samples)
        else:
            if "family" not in resolved:
                raise SpecError(f"Shape '{name}' needs a wamf03 or wamf07 spec", key="family")
            spectrum = amplitude_spectrum(CatalogSpec.model_validate(resolved))
            shaped = ShapedWaveform(spectrum, Shape(name), parameter, substeps).sequence()
        if table:
            _emit(json.dumps(sequence_record(shaped), indent=2) + "\n", output)
        else:
            _emit(filter_functions(shaped, grid_spec.grid() / shaped.duration).to_csv(), output)


@app.command("simulate")
def cmd_simulate(
    spec: Annotated[str, typer.Option("--spec", help="Experiment JSON, inline or a file")],
    threads: Threads = 1,
    output: Output = None,
) -> None:
    """Monte-Carlo infidelity next to the first-order filter-function prediction."""
    with _handled():
        experiment: ExperimentSpec = ExperimentSpec.model_validate(load_json(spec))
        _echo_config(
            RunConfig(
                command="simulate",
                spec=experiment.model_dump(mode="json"),
                output=_path(output),
                seed=experiment.seed,
                threads=threads,
            )
        )
        seq: ControlSequence = build(experiment.sequence)
        predicted: float = predicted_infidelity(seq, experiment.models)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["run", "seed", "n_realizations", "infidelity", "standard_error", "predicted"])
        means: list[float] = []
        errors: list[float] = []
        for run in range(experiment.runs):
            run_seed: int = experiment.seed + run
            estimate = ensemble_infidelity(
                seq,
                experiment.models,
                n_realizations=experiment.n_realizations,
                seed=run_seed,
                substeps=experiment.substeps,
                threads=threads,
            )
            means.append(estimate.infidelity)
            errors.append(estimate.standard_error)
            writer.writerow(
                [run, run_seed, experiment.n_realizations,
                 f"{estimate.infidelity:.17g}", f"{estimate.standard_error:.17g}", f"{predicted:.17g}"]
            )
        aggregate_error: float = math.sqrt(sum(e * e for e in errors)) / len(errors)
        writer.writerow(
            ["mean", experiment.seed, experiment.n_realizations * experiment.runs,
             f"{sum(means) / len(means):.17g}", f"{aggregate_error:.17g}", f"{predicted:.17g}"]
        )
        _emit(buffer.getvalue(), output)


def _path(output: Path | None) -> str | None:
    return str(output) if output is not None else None


def main() -> None:
    app()


if __name__ == "__main__":
    main()
