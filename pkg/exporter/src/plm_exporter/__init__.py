from .exporter import AGG_MODES, ExportError, ExportJob, export

__all__ = ["AGG_MODES", "ExportError", "ExportJob", "export"]
