import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

import pandas as pd

from models.errors import DirLinError, UsageError
from models.sample import SUPPORT_CIRCLE_CIRCLE, SUPPORT_SPHERE_LINE, Bandwidths, DirDirSample
from services.bandwidth import lcv_bandwidths
from services.config import load_config
from services.dataset_io import parse_support, read_sample
from services.gof_test import gof_bootstrap_test
from services.independence_test import INDEP_METHODS, indep_test, statistic_grid
from services.joint_fitting import fit_joint
from services.kde import kde_on_grid
from services.model_catalog import make_alternative
from services.rng_streams import make_stream
from services.simlab import (
    analyze_dataset,
    constants_frame,
    format_constants_table,
    resolve_family,
    run_bandwidth_grid,
    run_clt_experiment,
    run_constants_check,
    run_size_power,
)
from ui.export import frame_to_csv, kde_grid_frame, reports_to_frame, rows_to_frame, write_excel, write_report
from ui.plots import plot_density_contour

# --- 로깅 설정 ---
LOG_FILE = "dirlinlab.log"

logger = logging.getLogger("dirlinlab")


def setup_logging(out_dir: str = "output", verbose: bool = False) -> None:
    if not os.path.exists(out_dir):
        os.makedirs(out_dir)
    log_file_path = os.path.join(out_dir, LOG_FILE)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file_path, mode='a', encoding='utf-8'),
            logging.StreamHandler(sys.stderr),
        ],
        force=True,
    )


# --- 서브커맨드 ---
_COMMANDS = [
    "constants",
    "kde",
    "fit",
    "test-indep",
    "test-gof",
    "simulate",
    "mc-size-power",
    "mc-bandwidth-grid",
    "mc-clt",
    "analyze",
]

_DATA_COMMANDS = ("kde", "fit", "test-indep", "test-gof", "analyze")
SPHERE_GRID = 64   # 구면 위도 노드 (경도는 2배)


class _Parser(argparse.ArgumentParser):
    """인자 오류를 UsageError(종료 코드 1)로 바꾼다"""

    def error(self, message):
        raise UsageError(message)


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value 설정 파일")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="출력 폴더 (기본 output)")
    common.add_argument("--grid-circle", type=int, help="원 노드 수 (토러스 양 축 포함)")
    common.add_argument("--grid-line", type=int, help="직선 노드 수")
    common.add_argument("--truncation", type=float, help="직선 격자 절단 T (표준편차 단위)")
    common.add_argument("--bandwidths", help="'h,g' 고정 대역폭 (없으면 LCV)")
    common.add_argument("--B", type=int, help="부트스트랩/순열 반복 수")
    common.add_argument("--M", type=int, help="몬테카를로 반복 수")
    common.add_argument("--model", help="카탈로그 id 또는 사용자 지정 모형 문자열")
    common.add_argument("--alpha", help="유의수준 목록 (쉼표 구분)")
    common.add_argument("--degrees", action="store_true", help="입력 각도가 도 단위")
    common.add_argument("--xlsx", action="store_true", help="결과를 Excel로도 저장")
    common.add_argument("--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirlinlab", description="Directional-linear kernel density tests")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for name in _COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in _DATA_COMMANDS:
            p.add_argument("data", help="CSV 파일 (theta,z | theta,psi | x1,x2,x3,z)")
            p.add_argument("--support", help="머리글 없는 CSV의 지지집합 (cl | cc | sl)")
        if name == "test-indep":
            p.add_argument("--method", choices=INDEP_METHODS, default="permutation")
        if name == "test-gof":
            p.add_argument("--simple", action="store_true", help="카탈로그 기본값을 θ₀로 하는 단순 귀무가설")
            p.add_argument("--reselect", action="store_true", help="부트스트랩마다 LCV 대역폭 재선택")
        if name == "simulate":
            p.add_argument("--n", type=int, default=100)
            p.add_argument("--delta", type=float, default=0.0)
            p.add_argument("--output", help="출력 CSV 경로")
        if name in ("mc-size-power", "mc-bandwidth-grid"):
            p.add_argument("--n", help="표본 크기 목록")
            p.add_argument("--delta", help="편차 δ 목록")
            p.add_argument("--bandwidth-rule", choices=["fixed", "LCV", "medianLCV"])
        if name in ("mc-bandwidth-grid", "analyze"):
            p.add_argument("--bw-grid-size", type=int,
                           default=4 if name == "mc-bandwidth-grid" else None)
        if name == "mc-clt":
            p.add_argument("--n", type=int, help="표본 크기 (clt_n)")
            p.add_argument("--statistic", choices=["independence", "ise"])
    return parser


def _overrides(args) -> Dict[str, object]:
    """CLI 플래그 → 설정 키"""
    o: Dict[str, object] = {
        "master_seed": args.seed,
        "threads": args.threads,
        "out_dir": args.out,
        "grid_circle": args.grid_circle,
        "grid_torus": args.grid_circle,
        "grid_line": args.grid_line,
        "truncation": args.truncation,
        "B": args.B,
        "M": args.M,
        "alpha_list": args.alpha,
    }
    if args.bandwidths:
        o["bandwidths"] = args.bandwidths
        o["bandwidth_rule"] = "fixed"
    if args.model and args.command in ("mc-size-power", "mc-bandwidth-grid"):
        o["models"] = args.model
    if getattr(args, "bandwidth_rule", None):
        o["bandwidth_rule"] = args.bandwidth_rule
    if args.command in ("mc-size-power", "mc-bandwidth-grid"):
        o["n_list"] = args.n
        o["delta_list"] = args.delta
    if getattr(args, "bw_grid_size", None) is not None:
        o["bw_grid_size"] = args.bw_grid_size
    if args.command == "mc-clt":
        o["clt_n"] = args.n
        o["clt_statistic"] = args.statistic
    return o


def _bandwidths_for(args, sample) -> Optional[Bandwidths]:
    if not args.bandwidths:
        return None
    return Bandwidths.parse(args.bandwidths, dirdir=isinstance(sample, DirDirSample))


def _grid_for(sample, config):
    if sample.support == SUPPORT_CIRCLE_CIRCLE:
        return statistic_grid(sample, config.grid_torus, config.grid_torus)
    if sample.support == SUPPORT_SPHERE_LINE:
        return statistic_grid(sample, SPHERE_GRID, config.grid_line, config.truncation)
    return statistic_grid(sample, config.grid_circle, config.grid_line, config.truncation)


def _require_model(args) -> str:
    if not args.model:
        raise UsageError(f"{args.command}: --model is required")
    return args.model


def _maybe_excel(args, config, frames: Dict[str, pd.DataFrame], stem: str) -> None:
    if args.xlsx:
        path = write_excel(frames, os.path.join(config.out_dir, f"{stem}.xlsx"))
        print(f"wrote {path}")


# ============================================================
# 실행
# ============================================================


def run(args) -> int:
    config = load_config(args.config, _overrides(args))
    out = config.out_dir
    command = args.command
    logger.info(f"dirlinlab {command} (seed={config.master_seed}, threads={config.threads})")

    if command == "constants":
        checks = run_constants_check()
        print(format_constants_table(checks))
        frame_to_csv(constants_frame(checks), os.path.join(out, "constants.csv"))
        _maybe_excel(args, config, {"constants": constants_frame(checks)}, "constants")
        return 0 if all(c.passed for c in checks) else 2

    if command == "simulate":
        model = resolve_family(_require_model(args))
        target = make_alternative(model, args.delta) if args.delta > 0 else model
        sample = target.sample(args.n, make_stream(config.master_seed, "simulate", model.model_id,
                                                   args.n, args.delta))
        path = args.output or os.path.join(out, f"simulated_{model.model_id}_n{args.n}.csv")
        frame_to_csv(sample.to_frame(), path)
        print(f"wrote {path}")
        return 0

    if command == "mc-size-power":
        rows = run_size_power(config)
        frame = rows_to_frame(rows)
        print(frame.to_string(index=False))
        _maybe_excel(args, config, {"size_power": frame}, "size_power")
        return 0

    if command == "mc-bandwidth-grid":
        result = run_bandwidth_grid(config)
        print(result.frame.to_string(index=False))
        _maybe_excel(args, config, {"bandwidth_grid": result.frame}, "bandwidth_grid")
        return 0

    if command == "mc-clt":
        result = run_clt_experiment(config)
        print(result.summary())
        return 0

    # 자료 파일을 읽는 명령들
    support = parse_support(args.support)

    if command == "analyze":
        result = analyze_dataset(args.data, _require_model(args), config, degrees=args.degrees)
        print(result.summary)
        frames = {"report": reports_to_frame([result.report])}
        if result.surface is not None:
            frames["pvalue_surface"] = result.surface
        _maybe_excel(args, config, frames, "analysis")
        return 0

    sample = read_sample(args.data, support, args.degrees)
    stem = os.path.splitext(os.path.basename(args.data))[0]
    bw = _bandwidths_for(args, sample)

    if command == "kde":
        bw = bw or lcv_bandwidths(sample)
        grid = _grid_for(sample, config)
        kde = kde_on_grid(sample, bw, grid)
        path = frame_to_csv(kde_grid_frame(grid, kde.joint), os.path.join(out, f"{stem}_kde.csv"))
        print(f"bandwidths {bw.label()}; wrote {path}")
        if grid.first.kind == "circle":
            plot_density_contour(kde.joint, grid, os.path.join(out, f"{stem}_kde.svg"), sample,
                                 title=f"KDE ({bw.label()})")
        return 0

    if command == "fit":
        fit = fit_joint(resolve_family(_require_model(args)), sample, make_stream(config.master_seed, "fit"))
        print(fit.to_kv_text())
        return 0

    if command == "test-indep":
        report = indep_test(sample, bw, method=args.method, B=config.B, seed=config.master_seed,
                            grid=_grid_for(sample, config),
                            rng=make_stream(config.master_seed, "test-indep"), threads=config.threads)
    else:
        model = resolve_family(_require_model(args))
        theta0 = dict(model.params) if args.simple else None
        report = gof_bootstrap_test(sample, model, bw, B=config.B, seed=config.master_seed,
                                    rng=make_stream(config.master_seed, "test-gof", model.model_id),
                                    grid_shape=_grid_for(sample, config).shape, truncation=config.truncation,
                                    simple_theta0=theta0, reselect_bandwidths=args.reselect,
                                    threads=config.threads)
    print(report.to_kv_text())
    path = write_report(report, os.path.join(out, f"{stem}_{command}.txt"))
    logger.info(f"wrote {path}")
    _maybe_excel(args, config, {"report": reports_to_frame([report])}, f"{stem}_{command}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return e.exit_code
    setup_logging(args.out or "output", args.verbose)
    try:
        return run(args)
    except DirLinError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
