"""MCP server exposing the label propagation pipeline as tools."""

import logging
from fastmcp import FastMCP

from .tools import register_tools


logger = logging.getLogger(__name__)

mcp = FastMCP("lpssl")

register_tools(mcp)
