"""Systematic block random linear network coding for UDP flows."""

from .block_codec import BlockDecoder, BlockEncoder, CodedSymbol, CodingParams
from .channel import ChannelConfig, channel_admit
from .relay import RelayConfig
from .wire import parse, serialize

__version__ = "0.1.0"

__all__ = [
    "BlockDecoder",
    "BlockEncoder",
    "ChannelConfig",
    "CodedSymbol",
    "CodingParams",
    "RelayConfig",
    "channel_admit",
    "parse",
    "serialize",
]
