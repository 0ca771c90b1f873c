"""Age-partitioned Bloom filters for sliding-window membership."""

from .apbbf import ApbbfFilter, capacity_factor
from .apbf import ApbfFilter, FilterSpec
from .bloom_baseline import PartitionedBloom

__all__ = ["ApbbfFilter", "ApbfFilter", "FilterSpec", "PartitionedBloom", "capacity_factor"]
