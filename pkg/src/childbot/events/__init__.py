from .broker import (
    Broker,
    BrokerClient,
    BrokerConfig,
    BrokerServer,
    Connection,
    Subscription,
    broker_route,
)
from .model import (
    DEFAULT_MAX_FRAME,
    Event,
    EventClass,
    EventError,
    MalformedFrame,
    OversizeEvent,
    decode_event,
    encode_event,
    match_pattern,
    valid_name,
    valid_pattern,
)

__all__ = [
    "Broker", "BrokerClient", "BrokerConfig", "BrokerServer", "Connection", "Subscription",
    "broker_route", "DEFAULT_MAX_FRAME", "Event", "EventClass", "EventError", "MalformedFrame",
    "OversizeEvent", "decode_event", "encode_event", "match_pattern", "valid_name", "valid_pattern",
]
