from .components import DashboardComponents
from .report import Comparison, ReportError, ReportManager
