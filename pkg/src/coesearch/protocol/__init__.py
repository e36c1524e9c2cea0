"""Secure-search protocols, wire format and transports."""

from .client import ClientDatabase, SearchClient, SearchResult, search_code, search_coie
from .messages import MessageType, Scheme, SchemeConfig
from .server import SearchServer, TcpHost, spawn_loopback
from .session import (MatchOracle, Phase, Predicate, SearchSession, Transcript, dummy_indices,
                      hamming_count)
from .transport import LoopbackTransport, SocketTransport, Transport

__all__ = [
    "ClientDatabase", "LoopbackTransport", "MatchOracle", "MessageType", "Phase", "Predicate", "Scheme",
    "SchemeConfig", "SearchClient", "SearchResult", "SearchServer", "SearchSession", "SocketTransport",
    "TcpHost", "Transcript", "Transport", "dummy_indices", "hamming_count", "search_code", "search_coie",
    "spawn_loopback",
]
