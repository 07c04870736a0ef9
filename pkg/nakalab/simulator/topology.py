import networkx as nx
import numpy as np

from nakalab.simulator.errors import CannotConnect
from nakalab.utils.args import SimConfig
from nakalab.utils.exp import register_latency_model, stream, STREAM_TOPOLOGY

MAX_TOPOLOGY_RETRIES = 100


@register_latency_model('fixed')
def fixed_latency(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    return np.full(size, float(mean))


@register_latency_model('exponential')
def exponential_latency(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    # unit draws scaled afterwards, so runs that differ only in the mean see proportional delays
    return rng.standard_exponential(size) * mean


def build_topology(config: SimConfig) -> nx.Graph:
    """
    Every node opens `peer_degree` links to distinct peers chosen uniformly; links are
    bidirectional. A disconnected draw is retried with the next sub-seed.
    """
    n = config.total_nodes
    if not 0 < config.peer_degree < n:
        raise CannotConnect(f'peer_degree {config.peer_degree} impossible with {n} nodes')
    for attempt in range(MAX_TOPOLOGY_RETRIES):
        rng = stream(config.rng_seed, STREAM_TOPOLOGY, attempt)
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for node in range(n):
            others = np.array([p for p in range(n) if p != node])
            for peer in rng.choice(others, size=config.peer_degree, replace=False):
                graph.add_edge(node, int(peer))
        if nx.is_connected(graph):
            return graph
    raise CannotConnect(f'no connected graph for {n} nodes of degree {config.peer_degree} '
                        f'after {MAX_TOPOLOGY_RETRIES} attempts')
