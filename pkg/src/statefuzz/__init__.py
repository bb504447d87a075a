"""Protocol state fuzzing toolkit for distributed controller clusters.

Learns a Mealy-machine model of a cluster's East-West protocol behavior,
extracts feasible message sequences from it, mutates and injects them, and
flags attacks through behavioral detection criteria.  Ships a deterministic
simulated cluster as the reference system under learning.
"""

__version__ = "0.1.0"
