#pragma once

#include "lanet/geometry.hpp"
#include "lanet/model_config.hpp"
#include "lanet/nn/layers.hpp"
#include "lanet/scene.hpp"

#include <vector>

namespace lanet {

/// Geometric part of the map graph: node poses and the three typed edge sets
/// with their relative features. Depends only on the scene.
struct MapGraph {
    std::vector<Pose2> points;           // all map points, polygon-major order
    std::vector<int> point_polygon;      // owning polygon per point
    std::vector<Pose2> anchors;          // first point of each polygon
    EdgeList pt2pt;                      // KNN over all points
    EdgeList pl2pt;                      // source = point, target = owning polygon
    EdgeList pl2pl;                      // scene adjacency between polygon anchors
    std::vector<int> pl2pl_relation;     // Relation per pl2pl edge

    std::size_t num_points() const { return points.size(); }
    std::size_t num_polygons() const { return anchors.size(); }
};

MapGraph build_map_edges(const Scene& scene, int k);

class MapEncoder {
public:
    MapEncoder() = default;
    MapEncoder(nn::ParamStore& ps, const ModelConfig& cfg);

    struct Embeddings {
        nn::Var x_pt;
        nn::Var x_pl;
    };
    struct Encodings {
        nn::Var pt2pt;
        nn::Var pl2pt;
        nn::Var pl2pl;
    };

    Embeddings encode_raw(nn::Graph& g, const Scene& scene) const;
    Encodings encode_relations(nn::Graph& g, const MapGraph& graph) const;
    /// Repeats pt->pt self-attention, pl<-pt cross-attention and pl->pl
    /// self-attention `rounds` times with shared weights. Returns updated
    /// point embeddings and x_map.
    Embeddings run(nn::Graph& g, const MapGraph& graph, Embeddings x, const Encodings& r, int rounds) const;

    /// encode_raw + encode_relations + run with the configured round count.
    Embeddings forward(nn::Graph& g, const Scene& scene, const MapGraph& graph) const;

private:
    int width_ = 0;
    int rounds_ = 0;
    nn::Embedding pt_kind_, pt_sem_, pl_kind_, pl_sem_, relation_;
    nn::Mlp pt_in_, pl_in_;
    nn::Mlp rel_pt2pt_, rel_pl2pt_, rel_pl2pl_;
    nn::EdgeAttention att_pt2pt_, att_pl2pt_, att_pl2pl_;
};

}  // namespace lanet
