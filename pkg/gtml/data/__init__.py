from .database import RunRegistry
from .files import read_model, read_table, read_trajectory, write_model, write_table, write_trajectory
