import logging

logger = logging.getLogger("manipatch")
