"""Shared fixtures for the test suite: canonical model texts and closed forms."""

import math

BIRTH_DEATH = """\
species A
init A 0
reaction birth: 0 -> A rate 1.0
reaction death: A -> 0 rate 1.0
"""

# two-species gene expression cascade: mRNA M, protein P
GENE = """\
species M P
init M 0
init P 0
reaction transcription: 0 -> M rate 2.0
reaction translation: M -> M + P rate 10.0
reaction mrna_decay: M -> 0 rate 0.2625
reaction protein_decay: P -> 0 rate 1.0
"""

# quadratic pair birth-death: intensities 400 and k x(x-1)
QUADRATIC = """\
species A
init A poisson(15.0)
reaction pair_birth: 0 -> 2 A rate 400.0
reaction pair_death: 2 A -> 0 rate 0.1
"""

# linear birth used by the first-shared-event probability checks
PURE_BIRTH = """\
species A
init A 1
reaction birth: A -> 2 A rate 1.0
"""


def gene_mean_mrna(gamma, t):
    """Closed form for the gene model mRNA mean from an empty start."""
    return (2.0 / gamma) * (1.0 - math.exp(-gamma * t))


def gene_mean_protein(gamma, t):
    """Closed form for the gene model protein mean from an empty start."""
    a = 2.0 / gamma
    return 10.0 * a * (
        (1.0 - math.exp(-t)) - (math.exp(-gamma * t) - math.exp(-t)) / (1.0 - gamma)
    )
