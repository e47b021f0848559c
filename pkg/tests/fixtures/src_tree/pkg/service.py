import logging

logger = logging.getLogger(__name__)


def spawn(vm, create_seconds):
    logger.info("VM took %f seconds to spawn.", create_seconds)
    logger.debug("entering spawn for %s", vm)
    logger.info("Instance %(name)s started successfully", {"name": vm})
    if vm is None:
        logger.error("Machine failure while spawning instance")
    logger.warning("spawn is slow")
    msg = "dynamic"
    logger.info(msg)
    try:
        attach(vm)
    except OSError:
        logger.exception(
            "Unable to attach volume "
            "to instance %s", vm)
    logging.info(f"Scheduler picked host {vm}")
    logger.info("%s %d", vm, 3)
    x = compute(vm)
    return x
