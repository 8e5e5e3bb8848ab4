import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()  # Loads .env file locally


def _env_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else None


class Config:
    # 🧵 Parallelism (None = leave BLAS / thread pools at their defaults)
    THREADS = _env_int("MVAG_THREADS")

    # 🎲 Reproducibility
    SEED = int(os.getenv("MVAG_SEED", "42"))

    # 🧮 Integration parameters
    GAMMA = float(os.getenv("MVAG_GAMMA", "0.5"))
    EPSILON = float(os.getenv("MVAG_EPSILON", "0.001"))
    T_MAX = int(os.getenv("MVAG_TMAX", "50"))
    ALPHA_R = float(os.getenv("MVAG_ALPHA_R", "0.05"))
    KNN_K = int(os.getenv("MVAG_KNN", "10"))

    # 📐 Eigensolver
    EIG_TOL = float(os.getenv("MVAG_EIG_TOL", "1e-8"))
    EIG_CLAMP = 1e-10
    EIG_MIN_MATVECS = 1000
    EIG_MATVECS_PER_NODE = 10
    EIGENGAP_TAU = 1e-12
    EIG_RETRY_LOOSEN = 1e3

    # 🧭 Optimizer (COBYLA-style trust region)
    RHOBEG = 0.2
    RHOEND = 1e-6
    MAXFUN_PER_VIEW = 100
    FEASIBILITY_TOL = 1e-10

    # 🧩 Downstream tasks
    EMBED_DIM = int(os.getenv("MVAG_EMBED_DIM", "64"))
    KMEANS_RESTARTS = 10
    KMEANS_MAX_ITER = 300

    # 🛡️ Brute-force guards
    GRID_MAX_VIEWS = 4
    CONDUCTANCE_MAX_NODES = 18

    # 📝 Logging
    LOG_LEVEL = os.getenv("MVAG_LOG_LEVEL", "INFO")
