from joblib import Parallel

from app.core.config import settings


def replicate_pool(parallelism: int) -> Parallel:
    """Process pool for replicate tasks; results come back in submission order"""
    return Parallel(
        n_jobs=parallelism,
        backend=settings.WORKER_BACKEND,
        batch_size=1,
        verbose=0,
    )
