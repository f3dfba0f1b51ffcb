"""Walsh Filter MCP Server - filter-transfer functions of Walsh-synthesized qubit control."""

from __future__ import annotations

import json
from typing import Any

import numpy as np
from mcp.server.fastmcp import FastMCP

from .catalog import build, sequence_record
from .config import CatalogSpec, ExperimentSpec, GridSpec, parse_params
from .control import ControlSequence
from .filters import Quadrature, filter_functions, taylor_coefficients as _taylor_coefficients
from .optimize import (
    cost_map as _cost_map,
    find_c2_zero as _find_c2_zero,
    optimize_family,
    optimize_order,
    root_record,
)
from .simulate import ensemble_infidelity
from .spectral import CostBand, cost_record, filter_order, predicted_infidelity
from .types import FilterRow, SimulationRecord

mcp: FastMCP = FastMCP("WalshFilter", instructions="Walsh filter-transfer function MCP Server")

MAX_ROWS: int = 5000


def _sequence(family: str, params: str, tau: float) -> ControlSequence:
    return build(CatalogSpec.model_validate({"family": family, "params": params, "tau": tau}))


def _quadrature(name: str) -> Quadrature:
    try:
        return Quadrature(name)
    except ValueError:
        raise ValueError(f"Unknown quadrature '{name}', expected 'z' or 'omega'") from None


@mcp.tool()
def build_sequence(family: str, params: str = "", tau: float = 1.0) -> str:
    """Construct a catalog control sequence and return its segment table.

    Args:
        family: primitive, wamf03, wamf07, wpmf_correction, bb1, wrse, uwmf1 or uwmf2
        params: Comma-separated parameters, angles may be multiples of pi (e.g. "X0=3pi,X3=pi")
        tau: Total sequence duration
    """
    return json.dumps(sequence_record(_sequence(family, params, tau)), indent=2)


@mcp.tool()
def evaluate_filters(
    family: str,
    params: str = "",
    tau: float = 1.0,
    omega_min: float = 1e-9,
    omega_max: float = 1e-1,
    points_per_decade: int = 10,
) -> str:
    """Evaluate F_z and F_Omega on a logarithmic frequency grid.

    Args:
        family: Catalog family name
        params: Comma-separated family parameters
        tau: Total sequence duration
        omega_min: Lowest frequency in units of 1/tau
        omega_max: Highest frequency in units of 1/tau
        points_per_decade: Grid density
    """
    seq: ControlSequence = _sequence(family, params, tau)
    grid = GridSpec(
        omega_min=omega_min, omega_max=omega_max, points_per_decade=points_per_decade
    ).grid()
    if grid.size > MAX_ROWS:
        raise ValueError(f"Grid has {grid.size} points, the limit is {MAX_ROWS}")
    rows: list[FilterRow] = filter_functions(seq, grid / seq.duration).rows()
    return json.dumps(rows, indent=2)


@mcp.tool()
def compute_cost(
    family: str,
    params: str = "",
    tau: float = 1.0,
    omega_low: float = 1e-9,
    omega_high: float = 1e-1,
    quadrature: str = "z",
) -> str:
    """Integrate a filter function over a stopband [omega_low, omega_high].

    Args:
        family: Catalog family name
        params: Comma-separated family parameters
        tau: Total sequence duration
        omega_low: Lower band edge in units of 1/tau (0 allowed)
        omega_high: Upper band edge in units of 1/tau
        quadrature: "z" for dephasing or "omega" for amplitude noise
    """
    seq: ControlSequence = _sequence(family, params, tau)
    band = CostBand(omega_low / tau, omega_high / tau, _quadrature(quadrature))
    return json.dumps(cost_record(seq, band), indent=2)


@mcp.tool()
def estimate_filter_order(
    family: str,
    params: str = "",
    tau: float = 1.0,
    omega_low: float = 1e-9,
    omega_high: float = 1e-6,
    quadrature: str = "z",
) -> str:
    """Fit the log-log slope of F over a band; order = slope / 2 - 1.

    Args:
        family: Catalog family name
        params: Comma-separated family parameters
        tau: Total sequence duration
        omega_low: Lower band edge in units of 1/tau
        omega_high: Upper band edge in units of 1/tau
        quadrature: "z" or "omega"
    """
    seq: ControlSequence = _sequence(family, params, tau)
    estimate = filter_order(seq, _quadrature(quadrature), (omega_low / tau, omega_high / tau))
    return json.dumps(estimate.to_record(), indent=2)


@mcp.tool()
def taylor_coefficients(
    family: str, params: str = "", tau: float = 1.0, quadrature: str = "z", kmax: int = 3
) -> str:
    """Low-frequency coefficients C_2, C_4, ... of F in powers of (omega tau).

    Args:
        family: Catalog family name
        params: Comma-separated family parameters
        tau: Total sequence duration
        quadrature: "z" or "omega"
        kmax: Number of coefficients (1 to 4)
    """
    seq: ControlSequence = _sequence(family, params, tau)
    values = _taylor_coefficients(seq, _quadrature(quadrature), kmax=kmax)
    return json.dumps({f"C{2 * (i + 1)}": float(v) for i, v in enumerate(values)}, indent=2)


@mcp.tool()
def find_c2_zero(
    x0: float, low: float, high: float, omega_low: float = 1e-4, omega_high: float = 1e-2
) -> str:
    """Bisect the analytic WAMF_{0,3} C_2^(z) for the X3 that cancels it.

    Args:
        x0: Fixed X0 in radians (3 pi gives the dynamically corrected NOT)
        low: Lower bracket end for X3
        high: Upper bracket end for X3
        omega_low: Lower edge of the band the tuned cost and order are reported over
        omega_high: Upper edge of that band
    """
    value: float = _find_c2_zero(x0, (low, high))
    seq: ControlSequence = _sequence("wamf03", f"X0={x0!r},X3={value!r}", 1.0)
    record = root_record("wamf03", "X3", value, (low, high), seq, CostBand(omega_low, omega_high))
    return json.dumps(record, indent=2)


@mcp.tool()
def optimize_sequence(
    family: str,
    fixed: str,
    variational: str,
    omega_low: float = 1e-2,
    omega_high: float = 1.0,
    method: str = "nelder-mead",
    order: int = 2,
    restarts: int = 3,
    seed: int = 0,
) -> str:
    """Tune variational amplitudes by band cost or by nulling low-frequency time moments.

    Args:
        family: Catalog family name (e.g. wamf07)
        fixed: Fixed amplitudes, e.g. "X0=3pi"
        variational: Variational amplitudes with seed values, e.g. "X3=pi,X5=0,X6=0"
        omega_low: Lower band edge in units of 1/tau
        omega_high: Upper band edge in units of 1/tau
        method: "nelder-mead" minimizes log10 A_z; "moments" targets a filter order
        order: Target filter order for the moments method
        restarts: Jittered restarts after the first search
        seed: Seed of the restart jitter
    """
    band = CostBand(omega_low, omega_high)
    if method == "nelder-mead":
        result = optimize_family(
            family, parse_params(fixed), parse_params(variational), band, restarts=restarts, seed=seed
        )
    elif method == "moments":
        result = optimize_order(
            family,
            parse_params(fixed),
            parse_params(variational),
            band,
            order=order,
            restarts=restarts,
            seed=seed,
        )
    else:
        raise ValueError(f"Unknown method '{method}', expected 'nelder-mead' or 'moments'")
    return json.dumps(result.to_record(), indent=2)


@mcp.tool()
def cost_map(
    family: str,
    x_axis: str,
    x_low: float,
    x_high: float,
    y_axis: str,
    y_low: float,
    y_high: float,
    fixed: str = "",
    points: int = 21,
    omega_low: float = 1e-2,
    omega_high: float = 1.0,
) -> str:
    """Sample log10 A_z over a two-parameter grid and report the minimum.

    Args:
        family: Catalog family name
        x_axis: Parameter on the x axis (e.g. "X0")
        x_low: x axis start
        x_high: x axis end
        y_axis: Parameter on the y axis (e.g. "X3")
        y_low: y axis start
        y_high: y axis end
        fixed: Remaining fixed parameters
        points: Samples per axis
        omega_low: Lower band edge in units of 1/tau
        omega_high: Upper band edge in units of 1/tau
    """
    if points < 2 or points * points > MAX_ROWS:
        raise ValueError(f"Points per axis must lie in [2, {int(MAX_ROWS**0.5)}], got {points}")
    result = _cost_map(
        family,
        parse_params(fixed),
        (x_axis, np.linspace(x_low, x_high, points)),
        (y_axis, np.linspace(y_low, y_high, points)),
        CostBand(omega_low, omega_high),
    )
    x, y, value = result.minimum()
    payload: dict[str, Any] = {
        "minimum": {x_axis: x, y_axis: y, "log10_cost": value},
        "csv": result.to_csv(),
    }
    return json.dumps(payload, indent=2)


@mcp.tool()
def simulate_infidelity(experiment: str) -> str:
    """Monte-Carlo gate infidelity under classical noise next to the filter-function prediction.

    Args:
        experiment: JSON experiment spec {"sequence": {...}, "dephasing": {...},
            "amplitude": {...}, "n_realizations": 500, "seed": 0}
    """
    try:
        data: Any = json.loads(experiment)
    except json.JSONDecodeError as exc:
        raise ValueError(f"Malformed experiment JSON: {exc.msg}") from exc
    spec: ExperimentSpec = ExperimentSpec.model_validate(data)
    seq: ControlSequence = build(spec.sequence)
    predicted: float = predicted_infidelity(seq, spec.models)
    records: list[SimulationRecord] = []
    for run in range(spec.runs):
        estimate = ensemble_infidelity(
            seq,
            spec.models,
            n_realizations=spec.n_realizations,
            seed=spec.seed + run,
            substeps=spec.substeps,
        )
        records.append(
            {
                "run": str(run),
                "seed": spec.seed + run,
                "n_realizations": spec.n_realizations,
                "infidelity": estimate.infidelity,
                "standard_error": estimate.standard_error,
                "predicted": predicted,
            }
        )
    return json.dumps(records, indent=2)


def main() -> None:
    """Start the Walsh Filter MCP server over stdio."""
    mcp.run(transport="stdio")


if __name__ == "__main__":
    main()
