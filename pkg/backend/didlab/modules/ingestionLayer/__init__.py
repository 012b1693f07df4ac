from .panel_ingestor import PanelIngestor, load_panel_csv, micro_to_csv, write_panel_csv

__all__ = ["PanelIngestor", "load_panel_csv", "micro_to_csv", "write_panel_csv"]
