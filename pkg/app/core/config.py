import os

from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()


class Settings(BaseModel):
    PROJECT_NAME: str = "slbounds"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "WARNING")

    # Norm engine
    DEFAULT_TOL: float = float(os.getenv("DEFAULT_TOL", "1e-8"))
    DOUBLING_START: float = float(os.getenv("DOUBLING_START", "8"))
    DOUBLING_CAP: float = float(os.getenv("DOUBLING_CAP", str(2**20)))
    UNIFORM_SCAN_CAP: int = int(os.getenv("UNIFORM_SCAN_CAP", str(2**12)))
    ESS_SAMPLES: int = int(os.getenv("ESS_SAMPLES", str(2**16)))
    ESS_REFINE_SAMPLES: int = int(os.getenv("ESS_REFINE_SAMPLES", "256"))
    ESS_RTOL: float = float(os.getenv("ESS_RTOL", "1e-8"))
    TAIL_CHECK_SAMPLES: int = int(os.getenv("TAIL_CHECK_SAMPLES", "4096"))
    OMEGA_SEEDS: int = int(os.getenv("OMEGA_SEEDS", "4096"))

    # Quadrature
    QUAD_MAX_DEPTH: int = int(os.getenv("QUAD_MAX_DEPTH", "40"))
    QUAD_MAX_SEGMENTS: int = int(os.getenv("QUAD_MAX_SEGMENTS", "200000"))

    # Spectral oracle
    ORACLE_TOL: float = float(os.getenv("ORACLE_TOL", "1e-4"))
    ORACLE_START_L: float = float(os.getenv("ORACLE_START_L", "8"))
    ORACLE_MAX_L: float = float(os.getenv("ORACLE_MAX_L", "1024"))
    ORACLE_MIN_N: int = int(os.getenv("ORACLE_MIN_N", str(2**12)))
    ORACLE_MAX_N: int = int(os.getenv("ORACLE_MAX_N", str(2**17)))
    R_FLOOR: float = float(os.getenv("R_FLOOR", "1e-12"))
    STURM_MAX_RETRIES: int = int(os.getenv("STURM_MAX_RETRIES", "8"))

    # Verification
    FUZZ_TRIALS: int = int(os.getenv("FUZZ_TRIALS", "1000"))
    VIOLATION_RTOL: float = float(os.getenv("VIOLATION_RTOL", "1e-10"))
    IDENTITY_RTOL: float = float(os.getenv("IDENTITY_RTOL", "1e-8"))

    MAX_WORKERS: int = int(os.getenv("MAX_WORKERS", str(min(8, os.cpu_count() or 1))))

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
