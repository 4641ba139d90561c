from .region import EndpointSet, SwitchRegion, dispatch, indicator, update_region

__all__ = ["EndpointSet", "SwitchRegion", "dispatch", "indicator", "update_region"]
