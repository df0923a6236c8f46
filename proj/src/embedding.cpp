#include "repair/embedding.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "repair/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace repair {

double cosine_sim(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw std::runtime_error("cosine_sim: dimension mismatch (" + std::to_string(u.dim()) +
                                 " vs " + std::to_string(v.dim()) + ")");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0) throw std::runtime_error("cosine_sim: zero vector");
    double sim = dot / (std::sqrt(nu) * std::sqrt(nv));
    if (sim > 1.0) sim = 1.0;
    if (sim < -1.0) sim = -1.0;
    return sim;
}

std::vector<EmbeddingVector> Embedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

MockEmbedder::MockEmbedder(int dim) : dim_(dim) {
    if (dim < 1) throw std::runtime_error("MockEmbedder: dim must be >= 1");
}

EmbeddingVector MockEmbedder::embed(const std::string& text) {
    auto tokens = tokenize(text);
    if (tokens.empty()) {
        throw std::runtime_error("embed: text has no tokens (would produce a zero vector)");
    }
    EmbeddingVector vec;
    vec.values.assign(static_cast<size_t>(dim_), 0.0);
    for (const auto& tok : tokens) {
        vec.values[fnv1a64(tok) % static_cast<std::uint64_t>(dim_)] += 1.0;
    }
    double norm = 0.0;
    for (double x : vec.values) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : vec.values) x /= norm;
    return vec;
}

std::string MockEmbedder::cache_key_prefix() const {
    return "mock:" + std::to_string(dim_);
}

DiskCachedEmbedder::DiskCachedEmbedder(std::shared_ptr<Embedder> backend, std::string cache_dir,
                                       bool require_cached)
    : backend_(std::move(backend)), cache_dir_(std::move(cache_dir)),
      require_cached_(require_cached) {
    fs::create_directories(cache_dir_);
}

std::string DiskCachedEmbedder::cache_path_for(const std::string& text) const {
    std::string key = fnv1a64_hex(backend_->cache_key_prefix() + "\x1f" + text);
    return (fs::path(cache_dir_) / (key + ".json")).string();
}

EmbeddingVector DiskCachedEmbedder::load_cached(const std::string& path) const {
    json j = json::parse(read_text_file(path));
    EmbeddingVector vec;
    vec.values = j.at("values").get<std::vector<double>>();
    if (vec.values.size() != j.at("dim").get<size_t>()) {
        throw std::runtime_error("embedding cache corrupt: " + path);
    }
    return vec;
}

void DiskCachedEmbedder::store(const std::string& path, const EmbeddingVector& vec) const {
    json j;
    j["dim"] = vec.dim();
    j["values"] = vec.values;
    std::string tmp = path + ".tmp";
    write_text_file(tmp, j.dump());
    fs::rename(tmp, path);  // last writer wins; payloads are deterministic
}

EmbeddingVector DiskCachedEmbedder::embed(const std::string& text) {
    std::string path = cache_path_for(text);
    if (!refresh_ && fs::exists(path)) return load_cached(path);
    if (require_cached_) {
        throw std::runtime_error("embedding not cached (run the `index` subcommand first): " +
                                 path);
    }
    EmbeddingVector vec = backend_->embed(text);
    std::lock_guard<std::mutex> lock(write_mu_);
    store(path, vec);
    return vec;
}

std::vector<EmbeddingVector> DiskCachedEmbedder::embed_batch(const std::vector<std::string>& texts) {
    // Send only cache misses to the backend, then reassemble in request order.
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<size_t> missing;
    for (size_t i = 0; i < texts.size(); ++i) {
        std::string path = cache_path_for(texts[i]);
        if (!refresh_ && fs::exists(path)) {
            out[i] = load_cached(path);
        } else if (require_cached_) {
            throw std::runtime_error("embedding not cached (run the `index` subcommand first): " +
                                     path);
        } else {
            missing.push_back(i);
        }
    }
    if (!missing.empty()) {
        std::vector<std::string> batch;
        batch.reserve(missing.size());
        for (size_t i : missing) batch.push_back(texts[i]);
        auto vecs = backend_->embed_batch(batch);
        std::lock_guard<std::mutex> lock(write_mu_);
        for (size_t j = 0; j < missing.size(); ++j) {
            out[missing[j]] = vecs[j];
            store(cache_path_for(texts[missing[j]]), vecs[j]);
        }
    }
    return out;
}

std::string DiskCachedEmbedder::cache_key_prefix() const {
    return backend_->cache_key_prefix();
}

const EmbeddingVector& EmbeddingProvider::for_doc(const Document& doc) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = by_doc_id_.find(doc.id);
    if (it != by_doc_id_.end()) return it->second;
    auto [ins, _] = by_doc_id_.emplace(doc.id, backend_->embed(doc.text));
    return ins->second;
}

const EmbeddingVector& EmbeddingProvider::for_text(const std::string& text) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = by_text_.find(text);
    if (it != by_text_.end()) return it->second;
    auto [ins, _] = by_text_.emplace(text, backend_->embed(text));
    return ins->second;
}

void EmbeddingProvider::preload_doc(const std::string& doc_id, EmbeddingVector vec) {
    std::lock_guard<std::mutex> lock(mu_);
    by_doc_id_[doc_id] = std::move(vec);
}

}  // namespace repair
