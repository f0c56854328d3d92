"""Scenario files: validated experiment settings stored as JSON."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .exceptions import ParseError, ValidationError
from .game import ControllerGain, QuadraticGame
from .network import LtiNetwork, generate_case_study

MODELS = ("case_study", "scalar")
CONTROLLER_KINDS = ("auto", "omega", "matrix")
METHODS = ("reduced", "full")


@dataclass
class ScenarioTolerances:
    state: float = 1e-9
    gne: float = 1e-8
    # errors below this are ignored when fitting the contraction rate (default 1e3 * gne)
    rate_floor: float | None = None

    def floor(self) -> float:
        return self.rate_floor if self.rate_floor is not None else 1e3 * self.gne


@dataclass
class Scenario:
    """Settings of one run.

    Defaults: ``model="case_study"``, ``edge_budget=None`` (4 n_F follower
    links, at most all pairs), ``alpha=0.75``, ``tau_factor=0.99``, ``controller={"kind": "auto"}``,
    ``method="reduced"``, ``eps=step=0.01``, ``horizon=500``, ``out="out"``.
    """

    seed: int
    n_F: int
    m: int
    N: int
    model: str = "case_study"
    edge_budget: int | None = None
    alpha: float = 0.75
    tau_factor: float = 0.99
    controller: dict = field(default_factory=lambda: {"kind": "auto"})
    method: str = "reduced"
    eps: float = 0.01
    step: float = 0.01
    tolerances: ScenarioTolerances = field(default_factory=ScenarioTolerances)
    horizon: int = 500
    out: str = "out"

    def __post_init__(self):
        if isinstance(self.tolerances, dict):
            try:
                self.tolerances = ScenarioTolerances(**self.tolerances)
            except TypeError as exc:
                raise ValidationError(f"tolerances: {exc}") from None
        self.validate()

    def validate(self) -> None:
        for name in ("seed", "n_F", "m", "N", "horizon"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")
        for name in ("n_F", "m", "N", "horizon"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}")
        if self.model == "case_study" and self.m > self.n_F:
            raise ValidationError("m cannot exceed n_F")
        if self.edge_budget is not None and (not isinstance(self.edge_budget, int) or self.edge_budget < 1):
            raise ValidationError("edge_budget must be a positive integer or null")
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")
        if not 0 < self.tau_factor < 1:
            raise ValidationError("tau_factor must lie in (0, 1)")
        kind = self.controller.get("kind") if isinstance(self.controller, dict) else None
        if kind not in CONTROLLER_KINDS:
            raise ValidationError(f"controller.kind must be one of {CONTROLLER_KINDS}")
        if kind == "omega" and not 0 <= self.controller.get("omega", -1) <= 1:
            raise ValidationError("controller.omega must lie in [0, 1]")
        if kind == "matrix" and not isinstance(self.controller.get("path"), str):
            raise ValidationError("controller.path must name a gain file")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}")
        if not self.eps > 0 or not 0 < self.step < 1:
            raise ValidationError("need eps > 0 and step in (0, 1)")
        t = self.tolerances
        if not (t.state > 0 and t.gne > 0 and (t.rate_floor is None or t.rate_floor > 0)):
            raise ValidationError("tolerances must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


REQUIRED = ("seed", "n_F", "m", "N")


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ValidationError("scenario must be a JSON object")
    known = {f.name for f in fields(Scenario)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValidationError(f"unknown field(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED if k not in d]
    if missing:
        raise ValidationError(f"missing field(s): {', '.join(missing)}")
    try:
        return Scenario(**d)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def parse_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(d)


def write_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        fh.write(sc.dumps())


def preset(name: str, seed: int = 0) -> Scenario:
    """``scalar``: one agent on a one-state system; ``paper``: the advertising instance."""
    if name == "scalar":
        return Scenario(seed=seed, n_F=1, m=1, N=1, model="scalar",
                        controller={"kind": "omega", "omega": 1.0}, method="full",
                        tolerances=ScenarioTolerances(state=1e-13, gne=1e-13, rate_floor=1e-10),
                        horizon=200)
    if name == "paper":
        return Scenario(seed=seed, n_F=100, m=5, N=10, edge_budget=582, alpha=0.75, tau_factor=0.02,
                        horizon=500)
    raise ValidationError(f"unknown preset {name!r}")


def scalar_instance():
    """``x+ = 0.5 x + y``, one agent with target 1 and unit weights."""
    game = QuadraticGame([[[1.0]]], [[1.0]], [[[1.0]]], [-10.0], [10.0],
                         state_lo=[0.0], state_hi=[2.0])
    network = LtiNetwork([[0.5]], [[1.0]], alpha=np.array([0.5]))
    return game, network


def build_instance(sc: Scenario):
    """``(game, network, graph)``; the graph is None for the scalar model."""
    if sc.model == "scalar":
        game, network = scalar_instance()
        return game, network, None
    cs = generate_case_study(sc.seed, sc.n_F, sc.m, sc.N, sc.edge_budget, sc.alpha, sc.tau_factor)
    return cs.game, cs.network, cs.graph


def load_gain(path) -> ControllerGain:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if "K" not in d:
        raise ValidationError("gain file needs a 'K' entry")
    cap = d.get("cap")
    return ControllerGain.matrix(np.array(d["K"], dtype=float), np.inf if cap is None else float(cap))
