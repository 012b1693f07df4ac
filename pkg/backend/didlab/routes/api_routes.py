from datetime import datetime, timezone

import structlog
from flask import Blueprint, current_app, jsonify, request
from pydantic import ValidationError

from .. import __version__
from ..econometrics import (
    corollary_t_variance,
    nabla_second_moment,
    paired_twfe_variance,
    prop1_variance_gap,
    propA1_t_variance,
    rejection_from_inflation,
)
from ..errors import ErrorCode, LabError
from ..model import GapInputs, MCConfig, PanelData
from ..service import estimate_and_test
from ..service.tasks import run_experiment

logger = structlog.get_logger(__name__)

api_bp = Blueprint('api', __name__, url_prefix='/api')


def _error(e: LabError):
    return jsonify({"status": "error", **e.to_dict()}), e.http_status


@api_bp.errorhandler(LabError)
def handle_lab_error(e: LabError):
    logger.warning("request_failed", code=e.code.value, error=e.message, path=request.path)
    return _error(e)


@api_bp.errorhandler(ValidationError)
def handle_validation_error(e: ValidationError):
    return _error(LabError(ErrorCode.INVALID_CONFIG, f"invalid request body: {e.errors()[0]['msg']}", {"errors": e.error_count()}))


def _body() -> dict:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise LabError(ErrorCode.INVALID_CONFIG, "request body must be a JSON object")
    return data


def _float_arg(name: str, default=None) -> float:
    raw = request.args.get(name, default)
    if raw is None:
        raise LabError(ErrorCode.INVALID_CONFIG, f"missing query parameter {name!r}", {"parameter": name})
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise LabError(ErrorCode.INVALID_CONFIG, f"query parameter {name!r} must be a number", {"parameter": name}) from None


def _gap_inputs() -> GapInputs:
    return GapInputs(
        mu_gap=[_float_arg("mu_gap")],
        second_moment=[[_float_arg("moment")]],
        sigma_eps2_treated=_float_arg("sigma_eps2_treated", 1.0),
        sigma_eps2_control=_float_arg("sigma_eps2_control", 1.0),
        c=_float_arg("c", 0.5),
    )


def _paired_args() -> dict:
    return {
        "sigma_lambda2": _float_arg("sigma_lambda2"),
        "sigma_delta2": _float_arg("sigma_delta2"),
        "sigma_eps2_1": _float_arg("sigma_eps2_1", 1.0),
        "sigma_eps2_0": _float_arg("sigma_eps2_0", 1.0),
    }


_ANALYTIC = {
    "nabla": lambda: nabla_second_moment(_float_arg("rho"), int(_float_arg("T")), _float_arg("sigma_nu2", 1.0)),
    "gap": lambda: prop1_variance_gap(_gap_inputs()),
    "corollary": lambda: corollary_t_variance(_gap_inputs()),
    "propa1": lambda: propA1_t_variance(**_paired_args(), c=_float_arg("c", 0.5)),
    "rejection": lambda: rejection_from_inflation(_float_arg("kappa"), _float_arg("level", 0.05)),
    "paired": lambda: paired_twfe_variance(**_paired_args(), N1=int(_float_arg("n1")), N0=int(_float_arg("n0"))),
}


@api_bp.route('/status/health', methods=['GET'])
def health_check():
    """Health check endpoint"""
    return jsonify({
        "status": "healthy",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })


@api_bp.route('/analytic/<quantity>', methods=['GET'])
def analytic(quantity: str):
    """Closed-form quantity from query parameters"""
    if quantity not in _ANALYTIC:
        raise LabError(ErrorCode.INVALID_CONFIG, f"unknown quantity {quantity!r}", {"available": sorted(_ANALYTIC)})
    value = _ANALYTIC[quantity]()
    return jsonify({"status": "success", "quantity": quantity, "value": value, "parameters": request.args.to_dict()})


@api_bp.route('/estimate', methods=['POST'])
def estimate():
    """Estimate, variance and test for a panel posted as JSON"""
    data = _body()
    panel = PanelData.model_validate(data.get("panel") or {})
    options = {k: data[k] for k in ("horizon", "not_yet_treated", "s", "base") if k in data}
    result = estimate_and_test(
        panel,
        data.get("estimator", "twfe"),
        data.get("variance_method", "crve_group"),
        float(data.get("level", 0.05)),
        data.get("reference", "t"),
        small_sample=bool(data.get("small_sample", True)),
        cluster_level=bool(data.get("cluster_level", False)),
        **options,
    )
    return jsonify({"status": "success", "data": result})


@api_bp.route('/mc/run', methods=['POST'])
def run_mc():
    """Run a Monte Carlo experiment synchronously; replications are capped"""
    cfg = MCConfig.model_validate(_body())
    cap = current_app.config["DIDLAB_SETTINGS"].api_max_reps
    capped = cfg.reps > cap
    if capped:
        logger.info("mc_reps_capped", requested=cfg.reps, cap=cap)
        cfg = cfg.model_copy(update={"reps": cap})
    report = run_experiment(cfg)
    return jsonify({"status": "success", "data": report.model_dump(mode="json"), "reps_capped": capped})
