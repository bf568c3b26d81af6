import io
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter

from models.experiment import ResultRow
from models.results import TestReport
from services.quadrature import QuadratureGrid

FLOAT_FORMAT = "%.17g"


def _ensure_dir(path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)


def frame_to_csv(df: pd.DataFrame, path: str, columns: Optional[List[str]] = None) -> str:
    """고정 열 순서, 17자리 실수로 CSV 저장"""
    _ensure_dir(path)
    if columns is not None:
        df = df.reindex(columns=columns)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_result_csv(path: str) -> pd.DataFrame:
    """frame_to_csv 출력을 값 그대로 다시 읽는다"""
    return pd.read_csv(path, float_precision="round_trip")


# ── 결과 행 ──────────────────────────────────────────────────


def rows_to_frame(rows: List[ResultRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_csv_row() for r in rows], columns=ResultRow.CSV_COLUMNS)


def rows_from_frame(df: pd.DataFrame) -> List[ResultRow]:
    return [ResultRow.from_csv_row(d) for d in df.to_dict(orient="records")]


def write_result_rows(rows: List[ResultRow], path: str) -> str:
    """결과 CSV와 경과 시간 sidecar(*_timing.csv)를 함께 쓴다"""
    frame_to_csv(rows_to_frame(rows), path, ResultRow.CSV_COLUMNS)
    timing = pd.DataFrame([{"model_id": r.model_id, "n": r.n, "delta": r.delta, "alpha": r.alpha,
                            "elapsed": r.elapsed} for r in rows])
    frame_to_csv(timing, timing_path(path))
    return path


def timing_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_timing{ext or '.csv'}"


# ── 밀도 격자 ──────────────────────────────────────────────────


def kde_grid_frame(grid: QuadratureGrid, values: np.ndarray) -> pd.DataFrame:
    """격자 밀도를 긴 표로. 원은 first(각도), 구면은 x1, x2, x3 열."""
    k1, k2 = grid.shape
    if grid.first.kind == "circle":
        columns = {"first": np.repeat(grid.first.angles, k2)}
    else:
        pts = np.repeat(grid.first.points, k2, axis=0)
        columns = {f"x{i + 1}": pts[:, i] for i in range(pts.shape[1])}
    columns["second"] = np.tile(grid.second.angles if grid.second.is_directional else grid.second.points, k1)
    columns["density"] = np.asarray(values, dtype=float).ravel()
    return pd.DataFrame(columns)


# ── 검정 보고서 ──────────────────────────────────────────────────


def reports_to_frame(reports: List[TestReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_csv_row() for r in reports], columns=TestReport.CSV_COLUMNS)


def write_report(report: TestReport, path: str) -> str:
    """TestReport key=value 텍스트"""
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.to_kv_text() + "\n")
    return path


def write_text(text: str, path: str) -> str:
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text if text.endswith("\n") else text + "\n")
    return path


# ── Excel ──────────────────────────────────────────────────


def results_to_excel(frames: Dict[str, pd.DataFrame]) -> bytes:
    """결과 프레임들을 서식이 적용된 Excel 파일로 변환 (프레임당 시트 하나)"""
    wb = Workbook()
    header_fill = PatternFill(start_color="0033A0", end_color="0033A0", fill_type="solid")
    header_font = Font(color="FFFFFF", bold=True, size=10)
    center_align = Alignment(horizontal='center', vertical='center')

    wb.remove(wb.active)
    for name, df in frames.items():
        ws = wb.create_sheet(name[:31])
        ws.append([str(c) for c in df.columns])
        for cell in ws[1]:
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = center_align

        for record in df.itertuples(index=False):
            ws.append([None if pd.isna(v) else (v.item() if hasattr(v, "item") else v) for v in record])

        for i, col in enumerate(df.columns, 1):
            width = max([len(str(col))] + [len(str(v)) for v in df[col].head(200)])
            ws.column_dimensions[get_column_letter(i)].width = min(max(width + 2, 10), 40)

    if not wb.sheetnames:
        wb.create_sheet("Empty")

    buffer = io.BytesIO()
    wb.save(buffer)
    return buffer.getvalue()


def write_excel(frames: Dict[str, pd.DataFrame], path: str) -> str:
    _ensure_dir(path)
    with open(path, "wb") as f:
        f.write(results_to_excel(frames))
    return path
