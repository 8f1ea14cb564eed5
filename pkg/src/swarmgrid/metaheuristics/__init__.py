from swarmgrid.metaheuristics.bh import BasinHopping
from swarmgrid.metaheuristics.common import (
    CoolingSchedule,
    Individual,
    Island,
    IslandOptimizer,
    migrate,
    ring_route,
    roulette_select,
    roulette_weights,
    sa_accept,
    sa_temperature,
    starvation_route,
    starvation_target,
)
from swarmgrid.metaheuristics.de import DifferentialEvolution, de_generation, de_run, donor
from swarmgrid.metaheuristics.ea import Evolutionary, ea_generation
from swarmgrid.metaheuristics.fa import Firefly, fa_generation
from swarmgrid.metaheuristics.ga import GeneticAlgorithm, ga_generation
from swarmgrid.metaheuristics.mc import MonteCarlo
from swarmgrid.metaheuristics.pso import ParticleSwarm, pso_generation
from swarmgrid.metaheuristics.sa import SimulatedAnnealing, anneal

OPTIMIZERS = {
    "ga": GeneticAlgorithm,
    "de": DifferentialEvolution,
    "ps": ParticleSwarm,
    "sa": SimulatedAnnealing,
    "ea": Evolutionary,
    "fa": Firefly,
    "bh": BasinHopping,
    "mc": MonteCarlo,
}
