#include "kz/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <boost/math/quadrature/gauss.hpp>

namespace kz {

Region cartesian_region(double x0, double x1, double y0, double y1)
{
    static const auto identity = std::make_shared<const std::function<MappedPoint(double, double)>>(
        [](double u, double v) { return MappedPoint{{u, v}, 1.0}; });
    return {identity, x0, x1, y0, y1};
}

namespace {

struct Rule {
    std::vector<double> x, w;  // on [-1, 1]

    Rule()
    {
        using G = boost::math::quadrature::gauss<double, 7>;
        const auto& a = G::abscissa();
        const auto& wt = G::weights();
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0.0) {
                x.push_back(0.0);
                w.push_back(wt[i]);
            } else {
                x.push_back(a[i]);
                w.push_back(wt[i]);
                x.push_back(-a[i]);
                w.push_back(wt[i]);
            }
        }
    }
};

const Rule& rule()
{
    static const Rule r;
    return r;
}

struct Patch {
    std::size_t region;
    double u0, u1, v0, v1;
    std::vector<Complex> coarse;  // single rule over the patch
    std::vector<Complex> fine;    // sum of the rule over the quarters
    double err = 0.0;
};

class Integrator {
public:
    Integrator(std::span<const Region> regions, std::size_t m, const VectorIntegrand& f)
        : regions_(regions), m_(m), f_(f), scratch_(m) {}

    std::vector<Complex> apply(std::size_t region, double u0, double u1, double v0, double v1)
    {
        const auto& r = rule();
        const auto& map = *regions_[region].map;
        std::vector<Complex> acc(m_, 0.0);
        const double hu = 0.5 * (u1 - u0), hv = 0.5 * (v1 - v0);
        const double cu = 0.5 * (u1 + u0), cv = 0.5 * (v1 + v0);
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            for (std::size_t j = 0; j < r.x.size(); ++j) {
                const MappedPoint p = map(cu + hu * r.x[i], cv + hv * r.x[j]);
                f_(p.z, scratch_);
                const double w = r.w[i] * r.w[j] * hu * hv * p.jacobian;
                for (std::size_t k = 0; k < m_; ++k) acc[k] += w * scratch_[k];
            }
        }
        evaluations_ += r.x.size() * r.x.size();
        return acc;
    }

    void refine(Patch& p)
    {
        const double um = 0.5 * (p.u0 + p.u1), vm = 0.5 * (p.v0 + p.v1);
        const std::vector<Complex> quarters[4] = {
            apply(p.region, p.u0, um, p.v0, vm), apply(p.region, um, p.u1, p.v0, vm),
            apply(p.region, p.u0, um, vm, p.v1), apply(p.region, um, p.u1, vm, p.v1)};
        p.fine.assign(m_, 0.0);
        p.err = 0.0;
        for (std::size_t k = 0; k < m_; ++k) {
            for (const auto& q : quarters) p.fine[k] += q[k];
            p.err = std::max(p.err, std::abs(p.fine[k] - p.coarse[k]));
        }
    }

    std::size_t evaluations() const { return evaluations_; }

private:
    std::span<const Region> regions_;
    std::size_t m_;
    const VectorIntegrand& f_;
    std::vector<Complex> scratch_;
    std::size_t evaluations_ = 0;
};

CubatureResult collect(const std::vector<Patch>& patches, std::size_t m, std::size_t evaluations)
{
    CubatureResult r;
    r.value.assign(m, 0.0);
    r.error.assign(m, 0.0);
    for (const auto& p : patches) {
        for (std::size_t k = 0; k < m; ++k) {
            r.value[k] += p.fine[k];
            r.error[k] += std::abs(p.fine[k] - p.coarse[k]);
        }
    }
    r.patches = patches.size();
    r.evaluations = evaluations;
    return r;
}

}  // namespace

CubatureResult integrate(std::span<const Region> regions, std::size_t components, const VectorIntegrand& f,
                         const CubatureOptions& options)
{
    Integrator in(regions, components, f);
    std::vector<Patch> patches;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& r = regions[i];
        Patch p{i, r.u0, r.u1, r.v0, r.v1, {}, {}, 0.0};
        p.coarse = in.apply(i, r.u0, r.u1, r.v0, r.v1);
        in.refine(p);
        patches.push_back(std::move(p));
    }

    auto cmp = [&](std::size_t a, std::size_t b) { return patches[a].err < patches[b].err; };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> queue(cmp);
    for (std::size_t i = 0; i < patches.size(); ++i) queue.push(i);

    // Running totals are refreshed from scratch now and then so that
    // cancellation in the incremental updates cannot hide a missing error.
    CubatureResult total = collect(patches, components, in.evaluations());
    std::size_t since_refresh = 0;
    for (;;) {
        double scale = 0.0, worst = 0.0;
        for (std::size_t k = 0; k < components; ++k) {
            scale = std::max(scale, std::abs(total.value[k]));
            worst = std::max(worst, total.error[k]);
        }
        if (worst <= std::max(options.abs_tol, options.rel_tol * scale)) {
            total = collect(patches, components, in.evaluations());
            worst = *std::max_element(total.error.begin(), total.error.end());
            if (worst <= std::max(options.abs_tol, options.rel_tol * scale)) return total;
        }
        if (patches.size() + 3 > options.max_patches) {
            total = collect(patches, components, in.evaluations());
            throw QuadratureBudgetExceeded("cubature did not reach the requested tolerance within the patch budget",
                                           std::move(total));
        }

        const std::size_t idx = queue.top();
        queue.pop();
        Patch parent = std::move(patches[idx]);
        const double um = 0.5 * (parent.u0 + parent.u1), vm = 0.5 * (parent.v0 + parent.v1);
        const double bounds[4][4] = {{parent.u0, um, parent.v0, vm},
                                     {um, parent.u1, parent.v0, vm},
                                     {parent.u0, um, vm, parent.v1},
                                     {um, parent.u1, vm, parent.v1}};
        for (std::size_t k = 0; k < components; ++k) {
            total.value[k] -= parent.fine[k];
            total.error[k] -= std::abs(parent.fine[k] - parent.coarse[k]);
        }
        for (int q = 0; q < 4; ++q) {
            Patch child{parent.region, bounds[q][0], bounds[q][1], bounds[q][2], bounds[q][3], {}, {}, 0.0};
            child.coarse = in.apply(child.region, child.u0, child.u1, child.v0, child.v1);
            in.refine(child);
            for (std::size_t k = 0; k < components; ++k) {
                total.value[k] += child.fine[k];
                total.error[k] += std::abs(child.fine[k] - child.coarse[k]);
            }
            if (q == 0) {
                patches[idx] = std::move(child);
                queue.push(idx);
            } else {
                patches.push_back(std::move(child));
                queue.push(patches.size() - 1);
            }
        }
        if (++since_refresh == 1000) {
            total = collect(patches, components, in.evaluations());
            since_refresh = 0;
        }
    }
}

}  // namespace kz
