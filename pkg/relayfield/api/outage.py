"""Outage, direct-link, max-rate and transform routes."""

from __future__ import annotations

from fastapi import APIRouter, Request
from fastapi.concurrency import run_in_threadpool
from pydantic import ValidationError

from relayfield.config import ScenarioConfig, scenario_values, settings
from relayfield.content import parse_body, render_response
from relayfield.models import ErrorResponse, JointTransformArgs, OutageReport, rate_from_threshold
from relayfield.output import rate_rows, render_report_text
from relayfield.services import analytic, interference, report

router = APIRouter()

_ERRORS = {422: {"model": ErrorResponse}, 500: {"model": ErrorResponse}}


def _invalid(exc: Exception) -> dict:
    if isinstance(exc, ValidationError):
        detail = exc.errors(include_url=False, include_context=False, include_input=False)
    else:
        detail = str(exc)
    return {"error": "Invalid scenario", "detail": detail}


async def _scenario(request: Request, *, extra: tuple[str, ...] = ()) -> ScenarioConfig | dict:
    """ScenarioConfig from the request body, or an error payload.

    Keys named in ``extra`` are moved to ``config_extra`` on the request state.
    """
    try:
        body = await parse_body(request)
        if not isinstance(body, dict):
            raise TypeError("request body must be a mapping")
        request.state.config_extra = {key: body.pop(key, None) for key in extra}
        config = ScenarioConfig(**scenario_values(body))
    except (ValueError, TypeError) as exc:
        return _invalid(exc)
    if config.with_mc and config.trials > settings.max_trials_per_request:
        return {
            "error": "Too many trials",
            "detail": f"trials must be <= {settings.max_trials_per_request} per request",
        }
    if config.max_evaluations > settings.max_evaluations_per_request:
        return {
            "error": "Quadrature budget too large",
            "detail": (
                f"max_evaluations must be <= {settings.max_evaluations_per_request} per request"
            ),
        }
    return config


@router.post("/v1/outage", response_model=OutageReport, responses=_ERRORS)
async def outage(request: Request):
    """Every outage estimate at one scenario point."""
    config = await _scenario(request)
    if isinstance(config, dict):
        return render_response(request, config, status_code=422)
    result = await run_in_threadpool(report.outage_report, config)
    data = result.model_dump(mode="json")
    data["message"] = render_report_text(result)
    return render_response(request, data)


@router.post("/v1/direct", responses=_ERRORS)
async def direct(request: Request):
    """Direct-link outage and the largest threshold meeting ``rate_target``."""
    config = await _scenario(request)
    if isinstance(config, dict):
        return render_response(request, config, status_code=422)
    network = config.network()
    estimate = analytic.direct_outage(network, config.distance, config.threshold)
    t_max = analytic.direct_max_threshold(network, config.distance, config.rate_target)
    return render_response(
        request,
        {
            "outage": estimate.value,
            "target": config.rate_target,
            "t_max": t_max,
            "r_max": rate_from_threshold(t_max),
        },
    )


@router.post("/v1/max-rate", responses=_ERRORS)
async def rates(request: Request):
    """Maximum rate per protocol for every ``rate_ks`` entry."""
    config = await _scenario(request)
    if isinstance(config, dict):
        return render_response(request, config, status_code=422)
    points = len(config.rate_ks) * len(config.sweep_protocols)
    if points > settings.max_rate_points_per_request:
        return render_response(
            request,
            {
                "error": "Too many rate points",
                "detail": (
                    f"rate_ks x sweep_protocols gives {points} solves; "
                    f"at most {settings.max_rate_points_per_request} per request"
                ),
            },
            status_code=422,
        )
    rows = await run_in_threadpool(report.rate_table, config)
    return render_response(
        request,
        {"target": config.rate_target, "cf_entry": "upper-bound", "rows": rate_rows(rows)},
    )


@router.post("/v1/transform", responses=_ERRORS)
async def transform(request: Request):
    """Joint Laplace transform of the two interference powers.

    Takes ``omega1`` and ``omega2`` next to the scenario fields.
    """
    config = await _scenario(request, extra=("omega1", "omega2"))
    if isinstance(config, dict):
        return render_response(request, config, status_code=422)
    omegas = request.state.config_extra
    try:
        args = JointTransformArgs(
            omega1=omegas["omega1"],
            omega2=omegas["omega2"],
            geometry=config.geometry(),
            network=config.network(),
        )
    except ValidationError as exc:
        return render_response(request, _invalid(exc), status_code=422)
    joint = await run_in_threadpool(interference.laplace_joint, args, config.quad())
    return render_response(
        request,
        {
            "omega1": args.omega1,
            "omega2": args.omega2,
            "joint": joint,
            "marginal_d": interference.laplace_marginal(args.omega1, args.network),
            "marginal_r": interference.laplace_marginal(args.omega2, args.network),
        },
    )
