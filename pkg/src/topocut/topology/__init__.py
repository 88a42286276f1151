from .clusters import assign_clusters, persist_cluster_ids
from .damage import apply_damage_rules, volume_damage_bounds
from .discover import ClusterEntry, TopologyState, discover_topology
from .field import SdfField, carve_swept_volume, particle_sdf_field
from .mesh import SurfaceMesh, export_obj, extract_mesh, mesh_components, smooth_mesh

__all__ = [
    "assign_clusters", "persist_cluster_ids", "apply_damage_rules",
    "volume_damage_bounds", "ClusterEntry", "TopologyState", "discover_topology",
    "SdfField", "carve_swept_volume", "particle_sdf_field", "SurfaceMesh",
    "export_obj", "extract_mesh", "mesh_components", "smooth_mesh",
]
