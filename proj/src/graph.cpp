#include "repair/graph.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "repair/util.hpp"

using json = nlohmann::json;

namespace repair {

namespace {

bool edge_less(const NeighborEdge& a, const NeighborEdge& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
}

}  // namespace

CorpusGraph build_graph(const std::vector<Document>& docs,
                        const std::unordered_map<std::string, EmbeddingVector>& embeddings,
                        int degree, int threads) {
    if (degree < 1) throw std::runtime_error("build_graph: degree must be >= 1");
    for (const auto& doc : docs) {
        if (!embeddings.count(doc.id)) {
            throw std::runtime_error("build_graph: missing embedding for doc \"" + doc.id + "\"");
        }
    }

    CorpusGraph graph;
    graph.degree = degree;
    graph.doc_order.reserve(docs.size());
    for (const auto& doc : docs) graph.doc_order.push_back(doc.id);

    std::vector<std::vector<NeighborEdge>> rows(docs.size());
    auto build_row = [&](size_t i) {
        const auto& src = embeddings.at(docs[i].id);
        std::vector<NeighborEdge> cands;
        cands.reserve(docs.size() > 0 ? docs.size() - 1 : 0);
        for (size_t j = 0; j < docs.size(); ++j) {
            if (j == i) continue;
            cands.push_back({docs[j].id, cosine_sim(src, embeddings.at(docs[j].id))});
        }
        size_t keep = std::min(cands.size(), static_cast<size_t>(degree));
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                          cands.end(), edge_less);
        cands.resize(keep);
        rows[i] = std::move(cands);
    };

    // Rows are independent; chunk them across threads.
    int workers = std::max(1, std::min<int>(threads, static_cast<int>(docs.size())));
    if (workers == 1) {
        for (size_t i = 0; i < docs.size(); ++i) build_row(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (size_t i = static_cast<size_t>(w); i < docs.size();
                     i += static_cast<size_t>(workers)) {
                    build_row(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    for (size_t i = 0; i < docs.size(); ++i) graph.adjacency[docs[i].id] = std::move(rows[i]);
    return graph;
}

std::vector<NeighborEdge> neighbors(const CorpusGraph& graph,
                                    const std::vector<std::string>& seeds,
                                    const std::unordered_set<std::string>& exclude) {
    if (seeds.empty()) throw std::runtime_error("neighbors: empty seed list");

    std::unordered_set<std::string> seed_set(seeds.begin(), seeds.end());
    std::unordered_map<std::string, double> best;
    for (const auto& seed : seeds) {
        auto it = graph.adjacency.find(seed);
        if (it == graph.adjacency.end()) {
            throw std::runtime_error("neighbors: unknown seed \"" + seed + "\"");
        }
        for (const NeighborEdge& edge : it->second) {
            if (seed_set.count(edge.id) || exclude.count(edge.id)) continue;
            auto [pos, inserted] = best.emplace(edge.id, edge.sim);
            if (!inserted && edge.sim > pos->second) pos->second = edge.sim;
        }
    }

    std::vector<NeighborEdge> out;
    out.reserve(best.size());
    for (const auto& [id, sim] : best) out.push_back({id, sim});
    std::sort(out.begin(), out.end(), edge_less);
    return out;
}

void save_graph(const CorpusGraph& graph, const std::string& path) {
    std::string body;
    for (const auto& doc_id : graph.doc_order) {
        json nbrs = json::array();
        for (const NeighborEdge& edge : graph.adjacency.at(doc_id)) {
            nbrs.push_back({edge.id, edge.sim});
        }
        json line;
        line["doc"] = doc_id;
        line["nbrs"] = std::move(nbrs);
        body += line.dump();
        body += '\n';
    }
    write_text_file(path, body);
}

CorpusGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);

    CorpusGraph graph;
    graph.degree = 0;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed graph line: " + e.what());
        }
        std::string doc_id = rec.at("doc").get<std::string>();
        std::vector<NeighborEdge> edges;
        for (const auto& pair : rec.at("nbrs")) {
            edges.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
        }
        graph.degree = std::max(graph.degree, static_cast<int>(edges.size()));
        graph.doc_order.push_back(doc_id);
        graph.adjacency[doc_id] = std::move(edges);
    }
    if (graph.degree == 0) graph.degree = 1;
    return graph;
}

}  // namespace repair
