import functools
import logging
import time
from src.common.logger import setup_logger

logger = setup_logger("mergesim.tracer")

def monitor_run(func=None, *, level: int = logging.INFO):
    """
    Decorator to log run execution time, inputs, and success/failure status.
    Use bare (`@monitor_run`) or with a level (`@monitor_run(level=logging.DEBUG)`)
    for functions called once per episode.
    """
    def decorate(inner):
        @functools.wraps(inner)
        def wrapper(*args, **kwargs):
            run_name = inner.__name__
            start_time = time.time()

            # Log Start
            safe_inputs = {k: str(v) for k, v in kwargs.items()}
            logger.log(
                level,
                f"Run Started: {run_name}",
                extra={"run_name": run_name, "event": "start", "inputs": safe_inputs}
            )

            try:
                result = inner(*args, **kwargs)

                duration = (time.time() - start_time) * 1000
                logger.log(
                    level,
                    f"Run Finished: {run_name}",
                    extra={
                        "run_name": run_name,
                        "event": "finish",
                        "duration_ms": round(duration, 2),
                        "status": "success"
                    }
                )
                return result

            except Exception as e:
                duration = (time.time() - start_time) * 1000
                logger.error(
                    f"Run Crashed: {run_name}",
                    extra={
                        "run_name": run_name,
                        "event": "crash",
                        "duration_ms": round(duration, 2),
                        "status": "crash",
                        "error_type": type(e).__name__,
                    },
                    exc_info=True
                )
                raise e

        return wrapper

    if func is not None:
        return decorate(func)
    return decorate
