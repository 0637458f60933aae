"""Monte Carlo harness: scenarios, seeded replications and bias/RMSE reports.

Each replication draws its sample from a stream seeded by
``SeedSequence([master_seed, n, replication])``, so results do not depend on
execution order, and designs inside a scenario (clean versus contaminated)
share their base draws.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .estimators import EstimatorConfig, WeightingScheme, estimate
from .kernel import GaussianKernel
from .models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    ContaminatedModel,
    StudentTLocationScale,
    make_model,
)
from .weakcore import MomentSet

SCHEMA_VERSION = 1
DEFAULT_REPLICATIONS = 2000
DEFAULT_SEED = 20240601
STUDY_BANDWIDTH = 3.0


class ScenarioError(ValueError):
    """A scenario file does not follow the schema."""


@dataclass(frozen=True)
class Design:
    label: str
    data_model: object


@dataclass(frozen=True)
class Scenario:
    """A Monte Carlo study.

    ``groups`` names the scored parameter blocks as ``(name, indices)``; a
    block with several indices is scored through the Euclidean norm of the
    error vector.
    """

    name: str
    designs: tuple[Design, ...]
    estimators: tuple[EstimatorConfig, ...]
    sample_sizes: tuple[int, ...]
    targets: tuple[float, ...]
    groups: tuple[tuple[str, tuple[int, ...]], ...]
    replications: int = DEFAULT_REPLICATIONS
    master_seed: int = DEFAULT_SEED
    title: str = ""

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.sample_sizes or any(n < 1 for n in self.sample_sizes):
            raise ValueError("sample sizes must be a nonempty list of positive integers")
        if not self.designs:
            raise ValueError("a scenario needs at least one design")
        labels = [e.name for e in self.estimators]
        if len(set(labels)) != len(labels):
            raise ValueError("estimator labels must be unique")

    @property
    def data_model(self):
        return self.designs[0].data_model

    def with_overrides(self, replications: int | None = None, master_seed: int | None = None) -> Scenario:
        kw = dict(self.__dict__)
        if replications is not None:
            kw["replications"] = int(replications)
        if master_seed is not None:
            kw["master_seed"] = int(master_seed)
        return Scenario(**kw)


@dataclass(frozen=True)
class MCRow:
    design: str
    estimator: str
    n: int
    component: str
    bias: float
    rmse: float
    replications: int
    failures: int


@dataclass
class MCReport:
    scenario: str
    master_seed: int
    replications: int
    rows: list[MCRow] = field(default_factory=list)
    title: str = ""

    def get(self, estimator: str, n: int, component: str, design: str | None = None) -> MCRow:
        for r in self.rows:
            if r.estimator == estimator and r.n == n and r.component == component and (design is None or r.design == design):
                return r
        raise KeyError((design, estimator, n, component))

    @property
    def estimators(self) -> list[str]:
        return list(dict.fromkeys(r.estimator for r in self.rows))

    @property
    def designs(self) -> list[str]:
        return list(dict.fromkeys(r.design for r in self.rows))

    @property
    def sample_sizes(self) -> list[int]:
        return list(dict.fromkeys(r.n for r in self.rows))

    @property
    def components(self) -> list[str]:
        return list(dict.fromkeys(r.component for r in self.rows))


# --------------------------------------------------------------------------
# running


def replication_rng(master_seed: int, n: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(n), int(rep)]))


def _one_replication(scenario: Scenario, design: Design, n: int, rep: int) -> np.ndarray:
    """Estimates of every estimator on one sample; NaN rows for failures."""
    p = len(scenario.targets)
    out = np.full((len(scenario.estimators), p), np.nan)
    x = design.data_model.sample(n, replication_rng(scenario.master_seed, n, rep))
    for k, config in enumerate(scenario.estimators):
        try:
            res = estimate(x, config)
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError):
            continue
        if res.converged and np.all(np.isfinite(res.theta)):
            out[k] = res.theta
    return out


def _chunk(args) -> np.ndarray:
    scenario, design, n, reps = args
    return np.stack([_one_replication(scenario, design, n, r) for r in reps])


def simulate_estimates(scenario: Scenario, design: Design, n: int, workers: int = 1) -> np.ndarray:
    """Array ``(replications, estimators, p)`` ordered by replication index."""
    reps = range(scenario.replications)
    if workers <= 1:
        return _chunk((scenario, design, n, reps))
    size = math.ceil(scenario.replications / (4 * workers))
    chunks = [range(s, min(s + size, scenario.replications)) for s in range(0, scenario.replications, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_chunk, [(scenario, design, n, c) for c in chunks]))
    return np.concatenate(parts, axis=0)


def aggregate(errors: np.ndarray, indices: Sequence[int]) -> tuple[float, float, int]:
    """Bias, RMSE and number of failures for one parameter block.

    ``errors`` is ``(replications, p)`` with NaN rows for failures.  A scalar
    block reports the signed mean error, a vector block the norm of the mean
    error vector; RMSE is the root mean squared Euclidean error.
    """
    block = errors[:, list(indices)]
    ok = np.all(np.isfinite(errors), axis=1)
    failures = int(np.sum(~ok))
    if not ok.any():
        return math.nan, math.nan, failures
    block = block[ok]
    mean = block.mean(axis=0)
    bias = float(mean[0]) if len(indices) == 1 else float(np.linalg.norm(mean))
    rmse = float(np.sqrt(np.mean(np.sum(block * block, axis=1))))
    return bias, rmse, failures


def run_scenario(
    scenario: Scenario,
    replications: int | None = None,
    master_seed: int | None = None,
    workers: int = 1,
    progress=None,
) -> MCReport:
    scenario = scenario.with_overrides(replications, master_seed)
    targets = np.asarray(scenario.targets, dtype=float)
    report = MCReport(scenario.name, scenario.master_seed, scenario.replications, title=scenario.title)
    for design in scenario.designs:
        for n in scenario.sample_sizes:
            est = simulate_estimates(scenario, design, n, workers)
            for k, config in enumerate(scenario.estimators):
                err = est[:, k, :] - targets
                for comp, idx in scenario.groups:
                    bias, rmse, failures = aggregate(err, idx)
                    report.rows.append(
                        MCRow(design.label, config.name, n, comp, bias, rmse, scenario.replications, failures)
                    )
            if progress is not None:
                progress(design.label, n)
    return report


# --------------------------------------------------------------------------
# built-in studies


def _kernel(d: int = 1) -> GaussianKernel:
    return GaussianKernel(STUDY_BANDWIDTH, d)


def builtin_scenarios() -> list[Scenario]:
    """The five standard studies: clean and contaminated Cauchy location,
    univariate t_3 location-scale, bivariate Cauchy location and bivariate
    t_3 location-scale."""
    k1, k2 = _kernel(1), _kernel(2)
    ridge = WeightingScheme("twostep", 0.10)
    j1, j12 = MomentSet.powers([1]), MomentSet.powers([1, 2])

    cauchy = CauchyLocation(2.0)
    cauchy_est = (
        EstimatorConfig("wm", cauchy, k1, j1, normalized=True, label="WM"),
        EstimatorConfig("gmm", cauchy, k1, j12, label="GMM-I"),
        EstimatorConfig("gmm", cauchy, k1, j12, ridge, label="GMM-2S"),
        EstimatorConfig("median", cauchy, label="Median"),
        EstimatorConfig("mle", cauchy, label="MLE"),
        EstimatorConfig("huber", cauchy, tuning=1.345, label="Huber"),
        EstimatorConfig("tukey", cauchy, tuning=4.685, label="Tukey"),
    )
    cauchy_groups = (("mu", (0,)),)
    table1 = Scenario(
        "table1",
        (Design("clean", cauchy),),
        cauchy_est,
        (50, 100, 500, 1000, 5000),
        (2.0,),
        cauchy_groups,
        title="Cauchy location, clean",
    )
    table2 = Scenario(
        "table2",
        (Design("contaminated", ContaminatedModel(cauchy, CauchyLocation(7.0), 0.10)),),
        cauchy_est,
        (50, 100, 500, 1000, 5000),
        (2.0,),
        cauchy_groups,
        title="Cauchy location, asymmetric contamination (epsilon 0.1, delta 5)",
    )

    t3 = StudentTLocationScale(0.0, 1.0, 3.0)
    t3_est = (
        EstimatorConfig("gmm", t3, k1, j12, ridge, label="WM-GMM-2S"),
        EstimatorConfig("mle", t3, label="MLE"),
        EstimatorConfig("meansd", t3, label="Mean/SD"),
        EstimatorConfig("medmad", t3, label="Median/MAD"),
        EstimatorConfig("tukey", t3, tuning=4.685, label="Tukey"),
    )
    student = Scenario(
        "student-t3",
        (
            Design("clean", t3),
            Design("contaminated", ContaminatedModel(t3, StudentTLocationScale(0.0, 5.0, 3.0), 0.10)),
        ),
        t3_est,
        (100, 500, 1000),
        (0.0, 1.0),
        (("mu", (0,)), ("s", (1,))),
        title="Student t3 location-scale, clean and scale-contaminated",
    )

    c2 = BivariateCauchyLocation((1.0, 1.0))
    c2_est = (
        EstimatorConfig("wm", c2, k2, MomentSet.parse("1:0,0:1"), label="WM"),
        EstimatorConfig("spatialmedian", c2, label="Spatial Med."),
        EstimatorConfig("coordmedian", c2, label="Coord. Med."),
        EstimatorConfig("mle", c2, label="MLE"),
    )
    table3 = Scenario(
        "table3",
        (
            Design("clean", c2),
            Design("contaminated", ContaminatedModel(c2, BivariateCauchyLocation((6.0, 6.0)), 0.10)),
        ),
        c2_est,
        (50, 100, 500, 1000),
        (1.0, 1.0),
        (("mu", (0, 1)),),
        title="Bivariate Cauchy location, clean and shifted contamination",
    )

    b3 = BivariateT3LocationScale((0.0, 0.0), 1.0)
    b3_est = (
        EstimatorConfig("gmm", b3, k2, MomentSet.parse("1:0,0:1,r2"), ridge, label="WM-GMM-2S"),
        EstimatorConfig("mle", b3, label="MLE"),
        EstimatorConfig("meansd", b3, label="Mean/SD"),
        EstimatorConfig("medmad", b3, label="Med/MAD"),
    )
    table4 = Scenario(
        "table4",
        (
            Design("clean", b3),
            Design("contaminated", ContaminatedModel(b3, BivariateT3LocationScale((0.0, 0.0), 5.0), 0.10)),
        ),
        b3_est,
        (100, 500, 1000),
        (0.0, 0.0, 1.0),
        (("mu", (0, 1)), ("s", (2,))),
        title="Bivariate t3 location-scale, clean and scale-contaminated",
    )
    return [table1, table2, student, table3, table4]


def get_builtin(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise KeyError(f"no built-in scenario {name!r}; available: {[s.name for s in builtin_scenarios()]}")


# --------------------------------------------------------------------------
# scenario files

DEFAULT_GROUPS = {
    "cauchy": (("mu", (0,)),),
    "t": (("mu", (0,)), ("s", (1,))),
    "t3": (("mu", (0,)), ("s", (1,))),
    "cauchy2": (("mu", (0, 1)),),
    "t3-2d": (("mu", (0, 1)), ("s", (2,))),
}

_ESTIMATOR_KEYS = {"label", "method", "moments", "normalized", "weighting", "ridge", "tuning", "sigma", "max_iter", "tol"}
_TOP_KEYS = {
    "name",
    "title",
    "family",
    "theta",
    "nu",
    "sigma",
    "contamination",
    "designs",
    "sample_sizes",
    "replications",
    "seed",
    "estimators",
}


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required field '{key}'")
    return mapping[key]


def _model_from(family: str, theta, nu, where: str):
    try:
        if family in ("t", "t3"):
            mu, s = (float(v) for v in theta)
            return StudentTLocationScale(mu, s, float(nu if nu is not None else 3.0))
        return make_model(family, theta)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def scenario_from_dict(spec: dict) -> Scenario:
    """Build a scenario from a parsed scenario file (see the README for the schema)."""
    if not isinstance(spec, dict):
        raise ScenarioError("scenario file must contain a mapping")
    unknown = set(spec) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}")
    name = str(_require(spec, "name", "scenario"))
    family = str(_require(spec, "family", "scenario"))
    if family not in DEFAULT_GROUPS:
        raise ScenarioError(f"family: unknown family {family!r}; choose from {sorted(DEFAULT_GROUPS)}")
    theta = _require(spec, "theta", "scenario")
    base = _model_from(family, theta, spec.get("nu"), "theta")
    sigma = float(spec.get("sigma", STUDY_BANDWIDTH))
    if not sigma > 0:
        raise ScenarioError("sigma: must be positive")

    def contaminated(block, where):
        if block is None:
            return base
        if not isinstance(block, dict):
            raise ScenarioError(f"{where}: must be a mapping")
        cfam = str(block.get("family", family))
        ctheta = _require(block, "theta", where)
        eps = float(_require(block, "epsilon", where))
        try:
            return ContaminatedModel(base, _model_from(cfam, ctheta, block.get("nu", spec.get("nu")), where), eps)
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None

    if "designs" in spec:
        designs = tuple(
            Design(str(_require(d, "label", f"designs[{i}]")), contaminated(d.get("contamination"), f"designs[{i}].contamination"))
            for i, d in enumerate(spec["designs"])
        )
    else:
        label = "contaminated" if spec.get("contamination") else "clean"
        designs = (Design(label, contaminated(spec.get("contamination"), "contamination")),)

    sizes = _require(spec, "sample_sizes", "scenario")
    try:
        sizes = tuple(int(n) for n in sizes)
    except (TypeError, ValueError):
        raise ScenarioError("sample_sizes: must be a list of integers") from None
    estimators = []
    for i, e in enumerate(_require(spec, "estimators", "scenario")):
        where = f"estimators[{i}]"
        if not isinstance(e, dict):
            raise ScenarioError(f"{where}: must be a mapping")
        bad = set(e) - _ESTIMATOR_KEYS
        if bad:
            raise ScenarioError(f"{where}: unknown field(s) {sorted(bad)}")
        method = str(_require(e, "method", where))
        try:
            moments = MomentSet.parse(str(e["moments"])) if "moments" in e else None
            weighting = WeightingScheme(str(e.get("weighting", "identity")), float(e.get("ridge", 0.10)))
            estimators.append(
                EstimatorConfig(
                    method,
                    base,
                    GaussianKernel(float(e.get("sigma", sigma)), base.dimension),
                    moments,
                    weighting,
                    bool(e.get("normalized", False)),
                    float(e["tuning"]) if "tuning" in e else None,
                    max_iter=int(e.get("max_iter", 100)),
                    tol=float(e.get("tol", 1e-10)),
                    label=str(e.get("label", method)),
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    try:
        return Scenario(
            name,
            designs,
            tuple(estimators),
            sizes,
            tuple(float(t) for t in base.theta),
            DEFAULT_GROUPS[family],
            int(spec.get("replications", DEFAULT_REPLICATIONS)),
            int(spec.get("seed", DEFAULT_SEED)),
            str(spec.get("title", "")),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path) -> Scenario:
    """Read a YAML (or JSON) scenario file."""
    import yaml

    text = Path(path).read_text()
    try:
        spec = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML ({exc})") from None
    return scenario_from_dict(spec)


# --------------------------------------------------------------------------
# reports

CSV_FIELDS = ("design", "estimator", "n", "component", "bias", "rmse", "replications", "failures")


def _fmt(v: float) -> str:
    return repr(float(v))


def report_to_csv(report: MCReport) -> str:
    buf = io.StringIO()
    buf.write(f"# scenario={report.scenario}\n")
    buf.write(f"# title={report.title}\n")
    buf.write(f"# master_seed={report.master_seed}\n")
    buf.write(f"# replications={report.replications}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in report.rows:
        w.writerow([r.design, r.estimator, r.n, r.component, _fmt(r.bias), _fmt(r.rmse), r.replications, r.failures])
    return buf.getvalue()


def report_from_csv(text: str) -> MCReport:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line.strip():
            body.append(line)
    report = MCReport(meta.get("scenario", ""), int(meta.get("master_seed", 0)), int(meta.get("replications", 0)), title=meta.get("title", ""))
    for row in csv.DictReader(body):
        report.rows.append(
            MCRow(
                row["design"],
                row["estimator"],
                int(row["n"]),
                row["component"],
                float(row["bias"]),
                float(row["rmse"]),
                int(row["replications"]),
                int(row["failures"]),
            )
        )
    return report


def report_to_json(report: MCReport) -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "scenario": report.scenario,
        "title": report.title,
        "master_seed": report.master_seed,
        "replications": report.replications,
        "rows": [
            {
                "design": r.design,
                "estimator": r.estimator,
                "n": r.n,
                "component": r.component,
                "bias": None if math.isnan(r.bias) else r.bias,
                "rmse": None if math.isnan(r.rmse) else r.rmse,
                "replications": r.replications,
                "failures": r.failures,
            }
            for r in report.rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> MCReport:
    data = json.loads(text)
    report = MCReport(data["scenario"], data["master_seed"], data["replications"], title=data.get("title", ""))
    for r in data["rows"]:
        report.rows.append(
            MCRow(
                r["design"],
                r["estimator"],
                r["n"],
                r["component"],
                math.nan if r["bias"] is None else r["bias"],
                math.nan if r["rmse"] is None else r["rmse"],
                r["replications"],
                r["failures"],
            )
        )
    return report


def report_to_markdown(report: MCReport, digits: int = 2) -> str:
    """One table per design: a row per (n, component), a Bias/RMSE column pair per estimator."""
    ests = report.estimators
    lines = [f"## {report.scenario}" + (f": {report.title}" if report.title else ""), ""]
    lines.append(f"replications = {report.replications}, master seed = {report.master_seed}")
    lines.append("Vector parameter blocks report the norm of the mean error vector as bias.")
    lines.append("")
    if not report.rows:
        lines += ["| n | component |", "|---|---|"]
        return "\n".join(lines) + "\n"
    multi = len(report.components) > 1
    for design in report.designs:
        rows = [r for r in report.rows if r.design == design]
        lines.append(f"### {design}")
        lines.append("")
        head = ["n"] + (["param"] if multi else [])
        for e in ests:
            head += [f"{e} bias", f"{e} RMSE"]
        head.append("failures")
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for n in report.sample_sizes:
            for comp in report.components:
                cells = [str(n)] + ([comp] if multi else [])
                fails = 0
                for e in ests:
                    match = [r for r in rows if r.estimator == e and r.n == n and r.component == comp]
                    if match:
                        cells += [f"{match[0].bias:.{digits}f}", f"{match[0].rmse:.{digits}f}"]
                        fails += match[0].failures
                    else:
                        cells += ["", ""]
                cells.append(str(fails))
                lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def emit_report(report: MCReport, fmt: str, path=None) -> str:
    """Serialise to ``csv``, ``markdown``/``md`` or ``json``; write to ``path`` if given."""
    fmt = fmt.lower()
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt in ("markdown", "md"):
        text = report_to_markdown(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_report(path) -> MCReport:
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return report_from_json(text)
    return report_from_csv(text)
