#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "repair/corpus.hpp"
#include "repair/embedding.hpp"

namespace repair {

struct NeighborEdge {
    std::string id;
    double sim;
};

/// Precomputed k-NN corpus graph. Each document's list holds its top-`degree`
/// other documents by cosine similarity, sorted by sim descending with ties
/// broken by ascending id. No self-loops.
struct CorpusGraph {
    int degree = 16;
    std::vector<std::string> doc_order;  // corpus order, fixes serialization order
    std::unordered_map<std::string, std::vector<NeighborEdge>> adjacency;

    bool contains(const std::string& doc_id) const { return adjacency.count(doc_id) > 0; }
};

/// Exact (brute-force) k-NN build. Throws if a document has no embedding,
/// naming the document.
CorpusGraph build_graph(const std::vector<Document>& docs,
                        const std::unordered_map<std::string, EmbeddingVector>& embeddings,
                        int degree, int threads = 1);

/// Union of the seeds' adjacency lists minus `exclude` and minus the seeds
/// themselves. Each document appears once with its maximum similarity over
/// contributing seeds; sorted by sim descending, ties by ascending id.
/// Throws on a seed absent from the graph, naming it.
std::vector<NeighborEdge> neighbors(const CorpusGraph& graph,
                                    const std::vector<std::string>& seeds,
                                    const std::unordered_set<std::string>& exclude);

// Line-delimited JSON: {"doc": id, "nbrs": [[id, sim], ...]}
void save_graph(const CorpusGraph& graph, const std::string& path);
CorpusGraph load_graph(const std::string& path);

}  // namespace repair
