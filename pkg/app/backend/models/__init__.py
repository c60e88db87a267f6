from .base import DomainModel
from .permutation import Perm, ExplicitGroup, BlockGroup
from .dataset import Dataset
