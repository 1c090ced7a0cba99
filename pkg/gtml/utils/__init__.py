from .logging import diagnostic, setup_logging
from .seeding import task_int_seed, task_rng, task_seed_sequence
