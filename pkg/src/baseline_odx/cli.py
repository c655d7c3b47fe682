"""Command-line front end.

Exit codes: 0 success, 2 not estimable, 3 invalid input, 4 optimizer
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .approx import (
    DesignMeasure,
    NonConvergence,
    efficiency,
    exact_efficiency,
    measure_criterion,
    optimize_measure,
    round_measure,
)
from .constructions import (
    OddDegree,
    construct_d0,
    construct_dbar,
    construct_egd_2x3,
    construct_reference,
    construct_symmetric,
    d0_collection,
    dye_swap,
    family_phi,
    permuted_d0,
)
from .factorial import (
    Design,
    FactorLayout,
    InvalidInput,
    format_rational,
    frequencies,
    parse_rational,
    parse_treatment,
    treatment_label,
)
from .models import Dye, ModelSpec, NotEstimable, ReplicationPlan, variance_report
from .search import (
    CriterionWeights,
    augment_optimal,
    criterion_value,
    exhaustive_w_optimal,
    pareto_admissible,
)

EXIT_OK, EXIT_NOT_ESTIMABLE, EXIT_INVALID, EXIT_NONCONVERGENCE = 0, 2, 3, 4

MODELS = {"plain": Dye.NONE, "dye": Dye.GENERAL, "dye-reduced": Dye.REDUCED}
KINDS = ("d0", "collection", "dswap", "dbar", "reference", "symmetric", "egd2x3", "family")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def human(q) -> str:
    q = Fraction(q)
    return f"{format_rational(q)} (≈{float(q):.6g})"


def _read_json(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path} is not valid JSON: {exc}") from exc


def _design_from(data) -> Design:
    if isinstance(data, dict) and "design" in data:
        data = data["design"]
    if not isinstance(data, dict):
        raise InvalidInput("expected a single design object")
    return Design.from_dict(data)


def load_design(path: str) -> Design:
    return _design_from(_read_json(path))


def _parse_hetero(text: str, layout: FactorLayout) -> dict | list:
    items = [x for x in text.split(",") if x.strip()]
    if all("=" in x for x in items):
        pattern = {}
        for item in items:
            label, value = item.split("=", 1)
            pattern[parse_treatment(label, layout)] = parse_rational(value)
        missing = set(layout.treatments()) - set(pattern)
        if missing:
            raise InvalidInput(f"--hetero misses {', '.join(treatment_label(t) for t in sorted(missing))}")
        return pattern
    if any("=" in x for x in items):
        raise InvalidInput("--hetero mixes labelled and positional values")
    return [parse_rational(x) for x in items]


def build_model(args, layout: FactorLayout) -> ModelSpec:
    dye = MODELS[args.model]
    hetero = getattr(args, "hetero", None)
    replication = getattr(args, "replication", None)
    if hetero and replication:
        raise InvalidInput("--hetero and --replication cannot be combined")
    if hetero:
        return ModelSpec.heteroscedastic(layout, _parse_hetero(hetero, layout), dye)
    if replication:
        plan = ReplicationPlan.from_dict(_read_json(replication))
        ratio = parse_rational(args.ratio) if args.ratio is not None else Fraction(0)
        return ModelSpec(dye=dye, replication=plan, ratio=ratio)
    return ModelSpec(dye=dye)


def build_weights(args, layout: FactorLayout) -> CriterionWeights:
    text = args.weights if getattr(args, "weights", None) is not None else args.w
    text = str(text)
    if "=" not in text:
        return CriterionWeights.two_factor(layout, parse_rational(text))
    out = {}
    for item in text.split(","):
        label, value = item.split("=", 1)
        out[parse_treatment(label, layout)] = parse_rational(value)
    return CriterionWeights(out)


def _emit(obj) -> None:
    print(json.dumps(obj, separators=(",", ":")))


def _print_design(design: Design, indent: str = "  ") -> None:
    for s in design.slides:
        print(f"{indent}({treatment_label(s.red)}, {treatment_label(s.green)})")


# -- commands ----------------------------------------------------------------


def cmd_construct(args) -> int:
    layout = FactorLayout.parse(args.layout)
    kind = args.kind
    if args.permute and kind != "d0":
        raise InvalidInput("--permute applies to --kind d0 only")
    if kind == "collection":
        _emit([d.to_dict() for d in d0_collection(layout)])
        return EXIT_OK
    if kind == "d0":
        if args.permute:
            order = tuple(int(p) for p in args.permute.split(","))
            design = permuted_d0(layout, order)
        else:
            design = construct_d0(layout)
    elif kind == "dswap":
        design = dye_swap(construct_d0(layout))
    elif kind == "dbar":
        design = construct_dbar(layout)
    elif kind == "reference":
        design = construct_reference(layout)
    elif kind == "symmetric":
        design = construct_symmetric(layout)
    elif kind == "egd2x3":
        if layout.levels != (2, 3):
            raise InvalidInput("egd2x3 needs --layout 2x3")
        design = construct_egd_2x3()
    else:
        if layout.levels != (2, 2):
            raise InvalidInput("family needs --layout 2x2")
        if args.N is None or args.phi is None:
            raise InvalidInput("family needs --N and --phi")
        design = family_phi(args.N, args.phi)
    _emit(design.to_dict())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    design = load_design(args.design)
    layout = design.layout
    model = build_model(args, layout)
    report = variance_report(design, model)
    weights = build_weights(args, layout)
    crit = criterion_value(design, model, weights)
    if args.json:
        _emit(
            {
                "design": design.to_dict(),
                "unit": report.unit,
                "variances": {treatment_label(e): format_rational(q) for e, q in report.items()},
                "criterion": format_rational(crit),
            }
        )
    elif args.csv:
        sys.stdout.write(report.to_csv())
    else:
        print(f"effect  order  variance ({report.unit})")
        for e, q in report.items():
            print(f"{treatment_label(e):<7} {sum(1 for i in e if i):<6} {human(q)}")
        print(f"criterion: {human(crit)}")
    return EXIT_OK


def _restrict(args, layout):
    if not args.restrict:
        return None
    if args.restrict == "dbar":
        return construct_dbar(layout).slides
    return load_design(args.restrict).slides


def _print_result(result) -> None:
    print(f"criterion: {human(result.criterion)}")
    print(f"optima: {result.optima_count}")
    print("design:")
    _print_design(result.design)


def cmd_search(args) -> int:
    layout = FactorLayout.parse(args.layout)
    model = build_model(args, layout)
    restrict = _restrict(args, layout)
    if args.admissible:
        front = pareto_admissible(layout, args.slides, model, restrict=restrict, jobs=args.jobs)
        if args.json:
            _emit([d.to_dict() for d in front])
        else:
            print(f"admissible designs: {len(front)}")
            for d in front:
                vec = ", ".join(format_rational(q) for q in variance_report(d, model).vector())
                print(f"- variances ({vec})")
                _print_design(d, "    ")
        return EXIT_OK
    weights = build_weights(args, layout)
    result = exhaustive_w_optimal(layout, args.slides, model, weights, restrict=restrict, jobs=args.jobs)
    if args.json:
        _emit(result.to_dict(include_optima=args.all_optima))
    else:
        _print_result(result)
    return EXIT_OK


def cmd_augment(args) -> int:
    layout = FactorLayout.parse(args.layout)
    model = build_model(args, layout)
    result = augment_optimal(layout, args.slides, model, build_weights(args, layout), jobs=args.jobs)
    if args.json:
        _emit(result.to_dict(include_optima=args.all_optima))
    else:
        _print_result(result)
    return EXIT_OK


def _load_target(path: str):
    data = _read_json(path)
    if isinstance(data, dict) and "mass" in data:
        return DesignMeasure.from_dict(data)
    return _design_from(data)


def cmd_approx(args) -> int:
    layout = FactorLayout.parse(args.layout)
    model = build_model(args, layout)
    weights = build_weights(args, layout)
    out = {}
    measure = optimize_measure(
        layout, model, weights, args.parametrization, tol=args.tol, restarts=args.restarts, seed=args.seed
    )
    crit = measure_criterion(measure, model, weights, args.parametrization)
    out["measure"] = measure.to_dict()
    out["criterion"] = crit
    if args.efficiency_of:
        target = _load_target(args.efficiency_of)
        if target.layout != layout:
            raise InvalidInput("--efficiency-of design is on a different layout")
        if args.exact_reference:
            if not isinstance(target, Design):
                raise InvalidInput("--exact-reference needs an exact design")
            out["efficiency"] = exact_efficiency(target, model, weights, jobs=args.jobs)
        else:
            out["efficiency"] = efficiency(target, model, weights, args.parametrization, optimum=measure)
    if args.round is not None:
        out["rounded"] = round_measure(measure, args.round).to_dict()
    if args.json:
        _emit(out)
        return EXIT_OK
    print(f"criterion: {crit:.10g}")
    print("support:")
    for s, p in measure.support():
        print(f"  ({treatment_label(s.red)}, {treatment_label(s.green)})  {p:.6f}")
    if "efficiency" in out:
        print(f"efficiency: {out['efficiency']:.4f}%")
    if "rounded" in out:
        rounded = Design.from_dict(out["rounded"])
        if layout.levels == (2, 2):
            print(f"rounded ({args.round} slides): {frequencies(rounded)}")
        else:
            print(f"rounded ({args.round} slides):")
            _print_design(rounded)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _model_flags(p, replication: bool = False) -> None:
    p.add_argument("--model", choices=sorted(MODELS), default="plain")
    p.add_argument("--hetero", help="biological variance ratios, e.g. 2,3,4,6 or 00=2,01=3,...")
    if replication:
        p.add_argument("--replication", help="replication plan JSON file")
        p.add_argument("--ratio", help="biological/measurement variance ratio, e.g. 1/2")


def _weight_flags(p) -> None:
    p.add_argument("--w", default="1", help="interaction weight (main effects weigh 1)")
    p.add_argument("--weights", help="explicit weights, e.g. 01=1,10=1,11=2")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="baseline-odx", description="Optimal two-color microarray designs for factorials.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("construct", help="emit a named design as JSON")
    p.add_argument("--layout", required=True)
    p.add_argument("--kind", choices=KINDS, default="d0")
    p.add_argument("--N", type=int)
    p.add_argument("--phi", type=int)
    p.add_argument("--permute", help="factor order for d0, e.g. 2,0,1")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("evaluate", help="exact BLUE variances and criterion of a design")
    p.add_argument("--design", required=True, help="design JSON file, or - for stdin")
    _model_flags(p, replication=True)
    _weight_flags(p)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    for name, func, text in (
        ("search", cmd_search, "exhaustive w-optimal or admissible designs"),
        ("augment", cmd_augment, "best augmentation of the optimal saturated designs"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--layout", required=True)
        p.add_argument("--slides", "--N", dest="slides", type=int, required=True)
        _model_flags(p)
        _weight_flags(p)
        if name == "search":
            p.add_argument("--restrict", help="dbar, or a design JSON file whose slides form the candidates")
            p.add_argument("--admissible", action="store_true")
        p.add_argument("--all-optima", action="store_true")
        p.add_argument("--jobs", type=int)
        p.add_argument("--json", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("approx", help="optimal design measure, efficiencies and rounding")
    p.add_argument("--layout", required=True)
    _model_flags(p)
    _weight_flags(p)
    p.add_argument("--parametrization", choices=("baseline", "orthogonal"), default="baseline")
    p.add_argument("--round", type=int, metavar="N")
    p.add_argument("--efficiency-of", metavar="FILE")
    p.add_argument("--exact-reference", action="store_true", help="compare with the exact N-slide optimum")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_approx)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotEstimable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ESTIMABLE
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (InvalidInput, OddDegree, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
