from swarmgrid.exec_dist.client import Client, InitedClient
from swarmgrid.exec_dist.protocol import chunk_tasks, decode, encode, message
from swarmgrid.exec_dist.server import Action, Event, Server, WorkerRecord, WorkerState, on_worker_event
from swarmgrid.exec_dist.tasks import REGISTRY, TaskDescriptor, UnknownTaskKind, register
from swarmgrid.exec_dist.worker import Worker, worker_main
