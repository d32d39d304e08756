import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List

logger = logging.getLogger(__name__)


class WorkflowNode(ABC):
    """One stage of a workflow: reads the shared context and returns what it adds to it."""

    name: str = "node"

    @abstractmethod
    async def call(self, context: Dict[str, Any]) -> Dict[str, Any]:
        """
        Args:
            context: everything earlier nodes produced, plus the workflow's initial input

        Returns:
            {
                "success": True | False,
                "server_error": True | False,
                "data": entries to merge into the context (on success)
                "error": The error message (on failure)
            }
        """


class Workflow:
    def __init__(self, name: str, nodes: List[WorkflowNode]):
        self.nodes = nodes
        self.name = name
        logger.info(f"Workflow {self.name} initialized with {len(self.nodes)} nodes")

    async def run(self, context: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run nodes in order over a shared context. The first failing node stops the chain and its
        envelope is returned; otherwise the final context is returned under "data".
        """
        context = dict(context)
        for node in self.nodes:
            logger.info(f"Workflow {self.name}: running node {node.name}")
            try:
                result = await node.call(context)
            except Exception as e:
                logger.error(f"Workflow {self.name} node {node.name} raised: {e}", exc_info=True)
                return {"success": False, "server_error": True, "error": f"{node.name}: {str(e)}", "node": node.name}
            if result.get("success") is False:
                logger.error(f"Workflow {self.name} node {node.name} failed: {result.get('error')}")
                return {**result, "node": node.name}
            context.update(result.get("data", {}))
        return {"success": True, "server_error": False, "data": context}
