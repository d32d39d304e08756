from core.workflow.workflow_class import Workflow
from workflows.experiment_nodes import (
    EvaluateNode,
    ExportGridsNode,
    ExportMeasurementsNode,
    GenerateTruthNode,
    IngestRecordsNode,
    LoadNetworkNode,
    RunFilterNode,
    SimulateMeasurementsNode,
)

SimulateWorkflow = Workflow(name="SimulateWorkflow", nodes=[LoadNetworkNode(), GenerateTruthNode(), SimulateMeasurementsNode(), ExportMeasurementsNode(), ExportGridsNode()])

ExperimentWorkflow = Workflow(name="ExperimentWorkflow", nodes=[LoadNetworkNode(), GenerateTruthNode(), SimulateMeasurementsNode(), RunFilterNode(), EvaluateNode(), ExportGridsNode()])

FileFilterWorkflow = Workflow(name="FileFilterWorkflow", nodes=[LoadNetworkNode(), IngestRecordsNode(), RunFilterNode(), EvaluateNode(), ExportGridsNode()])
