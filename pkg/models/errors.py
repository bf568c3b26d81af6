"""dirlinlab 예외 계층.

CLI 종료 코드와 1:1로 대응한다 (UsageError=1, NumericError=2, DataError=3).
"""


class DirLinError(Exception):
    """dirlinlab 공통 예외"""
    exit_code: int = 2


class UsageError(DirLinError, ValueError):
    """잘못된 인자, 설정 값, 허용 범위를 벗어난 파라미터"""
    exit_code = 1


class NumericError(DirLinError, ArithmeticError):
    """비유한 값, 수렴 실패, 비허용 커널 등 수치 계산 실패"""
    exit_code = 2


class DataError(DirLinError, ValueError):
    """표본 크기 부족, 지지집합 불일치, CSV 파싱 오류"""
    exit_code = 3
