// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Exact k-nearest-neighbour search over a static point set with a k-d tree.
//
#include "splatflow/parallel.hpp"
#include "splatflow/regularize.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

namespace splatflow {

namespace {

constexpr std::size_t kLeafSize = 8;

struct Node {
    Vec3 lo, hi;
    std::uint32_t begin = 0, end = 0;
    int left = -1, right = -1;
};

class KdTree {
public:
    explicit KdTree(std::span<const Vec3> pts) : pts_(pts), order_(pts.size()) {
        std::iota(order_.begin(), order_.end(), 0u);
        if (!pts.empty()) build(0, std::uint32_t(pts.size()));
    }

    /// (squared distance, index) pairs sorted ascending, self excluded.
    void query(std::uint32_t self, int k, std::vector<std::pair<double, std::uint32_t>>& out) const {
        std::priority_queue<std::pair<double, std::uint32_t>> heap;
        search(0, self, std::size_t(k), heap);
        out.clear();
        while (!heap.empty()) {
            out.push_back(heap.top());
            heap.pop();
        }
        std::reverse(out.begin(), out.end());
    }

private:
    int build(std::uint32_t begin, std::uint32_t end) {
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = node.hi = pts_[order_[begin]];
        for (std::uint32_t i = begin; i < end; ++i) {
            node.lo = node.lo.cwiseMin(pts_[order_[i]]);
            node.hi = node.hi.cwiseMax(pts_[order_[i]]);
        }
        const int id = int(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) return id;

        int axis;
        (node.hi - node.lo).maxCoeff(&axis);
        const std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double va = pts_[a][axis], vb = pts_[b][axis];
                             return va != vb ? va < vb : a < b;
                         });
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    static double box_distance2(const Node& n, const Vec3& q) {
        const Vec3 d = (n.lo - q).cwiseMax(Vec3::Zero()).cwiseMax(q - n.hi);
        return d.squaredNorm();
    }

    void search(int id, std::uint32_t self, std::size_t k,
                std::priority_queue<std::pair<double, std::uint32_t>>& heap) const {
        const Node& n = nodes_[std::size_t(id)];
        const Vec3& q = pts_[self];
        if (heap.size() == k && box_distance2(n, q) > heap.top().first) return;
        if (n.left < 0) {
            for (std::uint32_t i = n.begin; i < n.end; ++i) {
                const std::uint32_t j = order_[i];
                if (j == self) continue;
                const std::pair<double, std::uint32_t> cand{(pts_[j] - q).squaredNorm(), j};
                if (heap.size() < k) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double dl = box_distance2(nodes_[std::size_t(n.left)], q);
        const double dr = box_distance2(nodes_[std::size_t(n.right)], q);
        if (dl <= dr) {
            search(n.left, self, k, heap);
            search(n.right, self, k, heap);
        } else {
            search(n.right, self, k, heap);
            search(n.left, self, k, heap);
        }
    }

    std::span<const Vec3> pts_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace

KnnIndex build_knn(std::span<const Vec3> positions, int k, int iteration) {
    if (k < 1) throw Error("knn: K must be positive");
    if (positions.size() <= std::size_t(k)) {
        throw Error("knn: point count " + std::to_string(positions.size()) + " must exceed K=" + std::to_string(k));
    }
    KdTree tree(positions);
    KnnIndex index;
    index.k = k;
    index.built_at = iteration;
    index.neighbors.resize(positions.size() * std::size_t(k));
    parallel_chunks(positions.size(), resolve_threads(0), [&](std::size_t begin, std::size_t end, int) {
        std::vector<std::pair<double, std::uint32_t>> found;
        for (std::size_t i = begin; i < end; ++i) {
            tree.query(std::uint32_t(i), k, found);
            for (int j = 0; j < k; ++j) index.neighbors[i * std::size_t(k) + std::size_t(j)] = found[std::size_t(j)].second;
        }
    });
    return index;
}

KnnIndex build_knn(const Scene& scene, int k, int iteration) {
    std::vector<Vec3> positions;
    positions.reserve(scene.points.size());
    for (const auto& p : scene.points) positions.push_back(p.mu0);
    return build_knn(positions, k, iteration);
}

} // namespace splatflow
