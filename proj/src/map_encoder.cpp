#include "lanet/map_encoder.hpp"

#include "lanet/features.hpp"

namespace lanet {

using nn::Var;

MapGraph build_map_edges(const Scene& scene, int k) {
    if (k < 1) throw std::invalid_argument("build_map_edges: k must be >= 1");
    MapGraph g;
    for (std::size_t i = 0; i < scene.polygons.size(); ++i) {
        const auto& poly = scene.polygons[i];
        g.anchors.push_back(poly.anchor());
        for (const auto& p : poly.points) {
            g.point_polygon.push_back(static_cast<int>(i));
            g.points.push_back(p);
        }
    }
    if (g.points.size() >= 2) g.pt2pt = knn_graph(g.points, k);
    for (std::size_t p = 0; p < g.points.size(); ++p) {
        const int pl = g.point_polygon[p];
        g.pl2pt.push(static_cast<int>(p), pl, rel_feature(g.points[p], g.anchors[pl]));
    }
    for (const auto& e : scene.adjacency) {
        g.pl2pl.push(e.source, e.target, rel_feature(g.anchors[e.source], g.anchors[e.target]));
        g.pl2pl_relation.push_back(static_cast<int>(e.relation));
    }
    return g;
}

MapEncoder::MapEncoder(nn::ParamStore& ps, const ModelConfig& cfg) : width_(cfg.width), rounds_(cfg.map_rounds) {
    const int d = cfg.width;
    pt_kind_ = nn::Embedding(ps, "map.pt_kind", kNumPolygonKinds, d);
    pt_sem_ = nn::Embedding(ps, "map.pt_semantic", kNumLaneTypes, d);
    pl_kind_ = nn::Embedding(ps, "map.pl_kind", kNumPolygonKinds, d);
    pl_sem_ = nn::Embedding(ps, "map.pl_semantic", kNumLaneTypes, d);
    relation_ = nn::Embedding(ps, "map.relation", kNumRelations, d);
    pt_in_ = nn::Mlp(ps, "map.pt_in", {kPointFeatureWidth + 2 * d, d, d});
    pl_in_ = nn::Mlp(ps, "map.pl_in", {kPolygonFeatureWidth + 2 * d, d, d});
    rel_pt2pt_ = nn::Mlp(ps, "map.r_pt2pt", {kRelFeatureWidth, d, d});
    rel_pl2pt_ = nn::Mlp(ps, "map.r_pl2pt", {kRelFeatureWidth, d, d});
    rel_pl2pl_ = nn::Mlp(ps, "map.r_pl2pl", {kRelFeatureWidth + d, d, d});
    att_pt2pt_ = nn::EdgeAttention(ps, "map.att_pt2pt", d, cfg.heads, d, false);
    att_pl2pt_ = nn::EdgeAttention(ps, "map.att_pl2pt", d, cfg.heads, d, true);
    att_pl2pl_ = nn::EdgeAttention(ps, "map.att_pl2pl", d, cfg.heads, d, false);
}

MapEncoder::Embeddings MapEncoder::encode_raw(nn::Graph& g, const Scene& scene) const {
    std::vector<int> pt_kind, pt_sem, pl_kind, pl_sem;
    for (const auto& poly : scene.polygons) {
        pl_kind.push_back(static_cast<int>(poly.kind));
        pl_sem.push_back(static_cast<int>(poly.semantic));
        for (std::size_t k = 0; k < poly.points.size(); ++k) {
            pt_kind.push_back(static_cast<int>(poly.kind));
            pt_sem.push_back(static_cast<int>(poly.semantic));
        }
    }
    Var pt = nn::concat_cols({g.tape.constant(point_features(scene)), pt_kind_(g, pt_kind), pt_sem_(g, pt_sem)});
    Var pl = nn::concat_cols({g.tape.constant(polygon_features(scene)), pl_kind_(g, pl_kind), pl_sem_(g, pl_sem)});
    return {pt_in_(g, pt), pl_in_(g, pl)};
}

MapEncoder::Encodings MapEncoder::encode_relations(nn::Graph& g, const MapGraph& graph) const {
    Encodings r;
    r.pt2pt = rel_pt2pt_(g, g.tape.constant(rel_matrix(graph.pt2pt)));
    r.pl2pt = rel_pl2pt_(g, g.tape.constant(rel_matrix(graph.pl2pt)));
    r.pl2pl = rel_pl2pl_(g, nn::concat_cols({g.tape.constant(rel_matrix(graph.pl2pl)), relation_(g, graph.pl2pl_relation)}));
    return r;
}

MapEncoder::Embeddings MapEncoder::run(nn::Graph& g, const MapGraph& graph, Embeddings x, const Encodings& r,
                                       int rounds) const {
    for (int i = 0; i < rounds; ++i) {
        x.x_pt = att_pt2pt_(g, x.x_pt, x.x_pt, graph.pt2pt.sources, graph.pt2pt.targets, r.pt2pt);
        x.x_pl = att_pl2pt_(g, x.x_pl, x.x_pt, graph.pl2pt.sources, graph.pl2pt.targets, r.pl2pt);
        x.x_pl = att_pl2pl_(g, x.x_pl, x.x_pl, graph.pl2pl.sources, graph.pl2pl.targets, r.pl2pl);
    }
    return x;
}

MapEncoder::Embeddings MapEncoder::forward(nn::Graph& g, const Scene& scene, const MapGraph& graph) const {
    return run(g, graph, encode_raw(g, scene), encode_relations(g, graph), rounds_);
}

}  // namespace lanet
