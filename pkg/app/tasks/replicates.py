import logging

from app.schemas.experiment import ReplicateJob, ReplicateOutcome
from app.services.engine import SimulationService
from app.services.indicators import IndicatorService
from app.services.random_stream import GENERATOR_FAMILY

logger = logging.getLogger(__name__)


def simulate_replicate(job: ReplicateJob) -> ReplicateOutcome:
    """
    Run one replicate of a plan cell and classify its final state

    Args:
        job: Replicate parameters, seed and classifier settings

    Returns:
        Outcome holding the compacted report (major clusters, no member
        indices) and the pattern codes, or the error text on failure
    """
    try:
        result = SimulationService.run(job.run_config, job.indicator_settings)
        snapshot = result.state.snapshot(job.run_config.params, GENERATOR_FAMILY)
        report = IndicatorService.compute_report(snapshot, job.indicator_settings)
        codes = IndicatorService.classify_both(report, job.thresholds)
        return ReplicateOutcome(
            job=job, report=report.compact(job.indicator_settings.major_share_threshold), codes=codes
        )
    except Exception as e:
        logger.error(f"Replicate failed ({job.describe()}): {e}", exc_info=True)
        return ReplicateOutcome(job=job, error=f"{type(e).__name__}: {e}")
