"""
Signals sent by the experiment runner
"""

import json
import logging
from django.dispatch import Signal, receiver


logger = logging.getLogger('frames')

# sender is the runner function; kwargs: config, result
task_completed = Signal()
# kwargs: config, task, certificate
certificate_issued = Signal()


@receiver(task_completed)
def log_task_completed(sender, config, result, **kwargs):
    """Signal handler for when a task has produced its result"""
    logger.info(json.dumps({
        "event": "task_completed",
        "experiment": config.name,
        "index": result.index,
        "type": result.type,
        "status": result.status,
    }))


@receiver(certificate_issued)
def log_certificate_issued(sender, config, task, certificate, **kwargs):
    """Signal handler for certificates; flags outcomes that contradict `expect`"""
    expected = task.get('expect')
    payload = {
        "event": "certificate_issued",
        "experiment": config.name,
        "theorem": certificate.theorem.value,
        "passed": certificate.passed,
        "margin": certificate.margin,
    }
    if expected and (expected == 'pass') != certificate.passed:
        payload["event"] = "certificate_unexpected"
        payload["expected"] = expected
        logger.warning(json.dumps(payload))
    else:
        logger.info(json.dumps(payload))
