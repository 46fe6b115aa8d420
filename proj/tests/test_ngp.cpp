#include <doctest.h>

#include <Eigen/Dense>

#include "ngpbo/ngp.hpp"
#include "test_util.hpp"

using namespace ngpbo;
using testutil::close;
using testutil::random_matrix;
using testutil::random_model;
using testutil::random_task;
using testutil::random_vector;
using testutil::small_config;

namespace {

// Joint-Gaussian conditioning by dense block inversion; same 1e-8 base
// jitter on the observed block as the production Cholesky path.
std::pair<Eigen::VectorXd, Eigen::VectorXd> conditioning_oracle(const NgpModel& model,
                                                                const Eigen::VectorXd& r,
                                                                const Eigen::MatrixXd& x_obs,
                                                                const Eigen::VectorXd& y_obs,
                                                                const Eigen::MatrixXd& x_query) {
    const Eigen::MatrixXd z_obs = embed_matrix(model, x_obs, r);
    const Eigen::MatrixXd z_query = embed_matrix(model, x_query, r);
    const Eigen::VectorXd m_obs = mean_vector(model, x_obs, r);
    const Eigen::VectorXd m_query = mean_vector(model, x_query, r);

    const auto k = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_eval(model.kernel_params, a, b);
    };
    const Eigen::Index n = x_obs.rows(), q = x_query.rows();
    Eigen::MatrixXd k_oo(n, n), k_oq(n, q);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) k_oo(i, j) = k(z_obs.row(i), z_obs.row(j));
        for (Eigen::Index j = 0; j < q; ++j) k_oq(i, j) = k(z_obs.row(i), z_query.row(j));
    }
    k_oo.diagonal().array() += model.noise_variance() + 1e-8;
    const Eigen::MatrixXd inv = k_oo.inverse();

    const Eigen::VectorXd mean = m_query + k_oq.transpose() * inv * (y_obs - m_obs);
    Eigen::VectorXd var(q);
    for (Eigen::Index j = 0; j < q; ++j)
        var(j) = k(z_query.row(j), z_query.row(j)) -
                 (k_oq.col(j).transpose() * inv * k_oq.col(j))(0);
    return {mean, var};
}

} // namespace

TEST_CASE("NgpConfig: ablation mapping and input dims") {
    const NgpConfig rmk = NgpConfig::make(true, true, true, 3, 2);
    CHECK(rmk.variant_name() == "NGP-RMK");
    CHECK(rmk.input_dim() == 5);
    CHECK(rmk.mean_arch.layer_sizes == std::vector<int>{5, 32, 32, 1});
    CHECK(rmk.embed_arch.layer_sizes == std::vector<int>{5, 32, 32});
    CHECK(rmk.embed_dim() == 32);

    CHECK(NgpConfig::make(true, true, false, 3, 2).variant_name() == "NGP-RM");
    CHECK(NgpConfig::make(true, false, true, 3, 2).variant_name() == "NGP-RK");
    const NgpConfig mk = NgpConfig::make(false, true, true, 3, 2);
    CHECK(mk.variant_name() == "NGP-MK");
    CHECK(mk.input_dim() == 3); // descriptor off
    CHECK(NgpConfig::make(false, false, false, 3, 2).variant_name() == "TGP");

    CHECK_THROWS_AS(NgpConfig::make(true, true, true, 3, 0), ConfigError);
}

TEST_CASE("task_input concatenation") {
    const NgpConfig on = NgpConfig::make(true, true, true, 2, 1);
    Eigen::VectorXd x(2), r(1);
    x << 1.0, 2.0;
    r << 9.0;
    Eigen::VectorXd u = task_input(on, x, r);
    REQUIRE(u.size() == 3);
    CHECK(u(0) == 1.0);
    CHECK(u(1) == 2.0);
    CHECK(u(2) == 9.0);

    const NgpConfig off = NgpConfig::make(false, true, true, 2, 1);
    CHECK(task_input(off, x, r) == x);

    Eigen::VectorXd empty(0);
    CHECK_THROWS_AS(task_input(on, x, empty), ConfigError);
}

TEST_CASE("mean_vector: ablations and row oracle") {
    Rng rng(21);
    const Eigen::MatrixXd x = random_matrix(rng, 5, 2);
    const Eigen::VectorXd r = random_vector(rng, 1);

    NgpModel no_mean = random_model(small_config(2 /*RK*/, 2, 1), 3);
    CHECK(mean_vector(no_mean, x, r).isZero(0.0));

    NgpModel zero_net = random_model(small_config(0 /*RMK*/, 2, 1), 4);
    for (auto& w : zero_net.mean_params.weights) w.setZero();
    for (auto& b : zero_net.mean_params.biases) b.setZero();
    CHECK(mean_vector(zero_net, x, r).isZero(0.0));

    const NgpModel m = random_model(small_config(0, 2, 1), 5);
    const Eigen::VectorXd got = mean_vector(m, x, r);
    for (int i = 0; i < 5; ++i) {
        const Eigen::VectorXd u = task_input(m.config, x.row(i), r);
        CHECK(got(i) == mlp_forward(m.mean_params, u)(0));
    }
}

TEST_CASE("embed_matrix: identity ablation and row oracle") {
    Rng rng(22);
    const Eigen::MatrixXd x = random_matrix(rng, 4, 3);
    const Eigen::VectorXd r = random_vector(rng, 2);

    const NgpModel rm = random_model(small_config(1 /*RM*/, 3, 2), 6);
    const Eigen::MatrixXd z_rm = embed_matrix(rm, x, r);
    CHECK(z_rm.cols() == 5); // identity on x ++ r
    CHECK(z_rm.leftCols(3) == x);

    const NgpConfig plain = NgpConfig::make(false, true, false, 3, 2, 6);
    const NgpModel m_plain = random_model(plain, 7);
    CHECK(embed_matrix(m_plain, x, r) == x);

    const NgpModel rmk = random_model(small_config(0, 3, 2), 8);
    const Eigen::MatrixXd z = embed_matrix(rmk, x, r);
    CHECK(z.cols() == rmk.config.embed_arch.output_dim());
    for (int i = 0; i < 4; ++i) {
        const Eigen::VectorXd u = task_input(rmk.config, x.row(i), r);
        CHECK(z.row(i).transpose() == mlp_forward(rmk.embed_params, u));
    }
}

TEST_CASE("log marginal likelihood: scalar Gaussian cases") {
    // N=1, zero mean, k(x,x)=1, noise -> 0, y=0.
    NgpConfig cfg = NgpConfig::make(false, false, false, 1, 1);
    NgpModel model = init_ngp(cfg, 0);
    model.kernel_params = KernelParams{0.0, 0.0, KernelKind::Rbf};
    model.log_noise_variance = -60.0;

    Task t;
    t.id = "scalar";
    t.x = Eigen::MatrixXd::Constant(1, 1, 0.3);
    t.y = Eigen::VectorXd::Zero(1);
    t.r = Eigen::VectorXd::Zero(1);
    CHECK(log_marginal_likelihood(model, t) == doctest::Approx(-0.9189385332).epsilon(1e-6));

    // k + noise = 2, y = 1.
    model.log_noise_variance = 0.0;
    t.y(0) = 1.0;
    CHECK(log_marginal_likelihood(model, t) ==
          doctest::Approx(-0.5 * (std::log(2.0 * M_PI) + std::log(2.0) + 0.5)).epsilon(1e-6));
}

TEST_CASE("log marginal likelihood matches the dense-inverse oracle") {
    Rng rng(404);
    for (int ablation = 0; ablation < 4; ++ablation) {
        const NgpConfig cfg = small_config(ablation, 3, 2);
        const NgpModel model = random_model(cfg, 100 + ablation);
        const Task t = random_task(rng, 6, 3, 2, "oracle");

        const Eigen::MatrixXd z = embed_matrix(model, t.x, t.r);
        const Eigen::VectorXd m = mean_vector(model, t.x, t.r);
        Eigen::MatrixXd c(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) c(i, j) = kernel_eval(model.kernel_params, z.row(i), z.row(j));
        c.diagonal().array() += model.noise_variance() + 1e-8;
        const Eigen::VectorXd resid = t.y - m;
        const double want = -0.5 * (6.0 * std::log(2.0 * M_PI) + std::log(c.determinant()) +
                                    resid.dot(c.inverse() * resid));
        CHECK(close(log_marginal_likelihood(model, t), want, 1e-10, 1e-12));
    }
}

TEST_CASE("lml_gradient: zero residual kills the mean gradient") {
    Rng rng(55);
    const NgpConfig cfg = small_config(0, 2, 1);
    const NgpModel model = random_model(cfg, 9);
    Task t = random_task(rng, 5, 2, 1);
    t.y = mean_vector(model, t.x, t.r); // y == m exactly

    const NgpGradient g = lml_gradient(model, t);
    CHECK(g.mean.pack().isZero(0.0));
    CHECK(g.embed.pack().size() > 0); // covariance part still flows
}

TEST_CASE("lml_gradient: disabled embedding has no psi block") {
    Rng rng(56);
    const NgpModel model = random_model(small_config(1 /*RM*/, 2, 1), 10);
    const Task t = random_task(rng, 4, 2, 1);
    const NgpGradient g = lml_gradient(model, t);
    CHECK(g.embed.d_weights.empty());
    CHECK(pack_gradient(model, g).size() == model.param_count());
}

TEST_CASE("lml_gradient matches finite differences on all ablations") {
    Rng rng(777);
    for (int ablation = 0; ablation < 4; ++ablation) {
        for (int rep = 0; rep < 3; ++rep) {
            const int m = static_cast<int>(1 + rng.uniform_int(4));
            const int s = static_cast<int>(1 + rng.uniform_int(2));
            const int n = static_cast<int>(2 + rng.uniform_int(7));
            const NgpConfig cfg = small_config(ablation, m, s);
            NgpModel model = random_model(cfg, mix_seed(1000, ablation * 10 + rep));
            const Task t = random_task(rng, n, m, s);

            const Eigen::VectorXd analytic = pack_gradient(model, lml_gradient(model, t));
            const Eigen::VectorXd theta = model.pack_params();
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                const double h = 1e-5 * std::max(1.0, std::abs(theta(i)));
                Eigen::VectorXd bumped = theta;
                bumped(i) += h;
                model.unpack_params(bumped);
                const double up = log_marginal_likelihood(model, t);
                bumped(i) -= 2 * h;
                model.unpack_params(bumped);
                const double down = log_marginal_likelihood(model, t);
                model.unpack_params(theta);
                const double fd = (up - down) / (2 * h);
                CHECK_MESSAGE(close(analytic(i), fd, 1e-4, 2e-6),
                              "ablation ", ablation, " param ", i, " analytic=", analytic(i), " fd=", fd);
            }
        }
    }
}

TEST_CASE("posterior: zero observations give the prior") {
    Rng rng(66);
    const NgpModel model = random_model(small_config(0, 2, 1), 11);
    const Eigen::MatrixXd xq = random_matrix(rng, 4, 2);
    const Eigen::VectorXd r = random_vector(rng, 1);

    const Posterior post = posterior(model, r, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), xq);
    CHECK(post.mean == mean_vector(model, xq, r));
    CHECK(post.variance == kernel_diag(model.kernel_params, embed_matrix(model, xq, r)));
}

TEST_CASE("posterior: near interpolation at tiny noise") {
    Rng rng(67);
    NgpModel model = random_model(small_config(0, 2, 1), 12);
    model.log_noise_variance = std::log(1e-12);
    const Eigen::MatrixXd x = random_matrix(rng, 1, 2);
    const Eigen::VectorXd r = random_vector(rng, 1);
    Eigen::VectorXd y(1);
    y << 0.7;

    const Posterior post = posterior(model, r, x, y, x);
    CHECK(std::abs(post.mean(0) - 0.7) < 1e-4);
    CHECK(post.variance(0) < 1e-6);
}

TEST_CASE("posterior matches the block-conditioning oracle") {
    Rng rng(4242);
    for (int ablation = 0; ablation < 4; ++ablation) {
        for (int rep = 0; rep < 4; ++rep) {
            const NgpModel model = random_model(small_config(ablation, 2, 1), mix_seed(31, ablation * 7 + rep));
            const Eigen::MatrixXd xo = random_matrix(rng, 4, 2);
            const Eigen::VectorXd yo = random_vector(rng, 4);
            const Eigen::MatrixXd xq = random_matrix(rng, 3, 2);
            const Eigen::VectorXd r = random_vector(rng, 1);

            const Posterior post = posterior(model, r, xo, yo, xq);
            const auto [mean, var] = conditioning_oracle(model, r, xo, yo, xq);
            for (int j = 0; j < 3; ++j) {
                CHECK(std::abs(post.mean(j) - mean(j)) < 1e-8);
                CHECK(std::abs(post.variance(j) - std::max(var(j), 0.0)) < 1e-8);
            }
        }
    }
}

TEST_CASE("posterior variance never exceeds the prior variance") {
    Rng rng(91);
    for (int rep = 0; rep < 10; ++rep) {
        const NgpModel model = random_model(small_config(rep % 4, 2, 1), mix_seed(61, rep));
        const Eigen::MatrixXd xo = random_matrix(rng, 5, 2);
        const Eigen::VectorXd yo = random_vector(rng, 5);
        const Eigen::MatrixXd xq = random_matrix(rng, 6, 2);
        const Eigen::VectorXd r = random_vector(rng, 1);

        const Posterior post = posterior(model, r, xo, yo, xq);
        const Eigen::VectorXd prior = kernel_diag(model.kernel_params, embed_matrix(model, xq, r));
        for (int j = 0; j < 6; ++j) CHECK(post.variance(j) <= prior(j) + 1e-10);
    }
}

TEST_CASE("posterior with duplicated observations stays consistent") {
    Rng rng(92);
    NgpModel model = random_model(small_config(0, 2, 1), 13);
    model.log_noise_variance = std::log(0.05); // strictly positive noise
    const Eigen::MatrixXd x1 = random_matrix(rng, 3, 2);
    const Eigen::VectorXd y1 = random_vector(rng, 3);
    const Eigen::MatrixXd xq = random_matrix(rng, 3, 2);
    const Eigen::VectorXd r = random_vector(rng, 1);

    Eigen::MatrixXd x2(4, 2);
    x2 << x1, x1.row(1);
    Eigen::VectorXd y2(4);
    y2 << y1, y1(1);

    const Posterior post = posterior(model, r, x2, y2, xq);
    const auto [mean, var] = conditioning_oracle(model, r, x2, y2, xq);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(post.mean(j) - mean(j)) < 1e-8);
        CHECK(std::abs(post.variance(j) - std::max(var(j), 0.0)) < 1e-8);
    }
}

TEST_CASE("a far observation leaves query means untouched") {
    Rng rng(93);
    NgpModel model = random_model(small_config(1 /*RM: identity embedding*/, 2, 1), 14);
    const Eigen::MatrixXd xq = random_matrix(rng, 4, 2, -1.0, 1.0);
    const Eigen::VectorXd r = random_vector(rng, 1);
    const Eigen::MatrixXd xo = random_matrix(rng, 2, 2, -1.0, 1.0);
    const Eigen::VectorXd yo = random_vector(rng, 2);

    Eigen::MatrixXd xo_far(3, 2);
    xo_far << xo, Eigen::RowVector2d(500.0, 500.0);
    Eigen::VectorXd yo_far(3);
    yo_far << yo, 10.0;

    const Posterior base = posterior(model, r, xo, yo, xq);
    const Posterior with_far = posterior(model, r, xo_far, yo_far, xq);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(base.mean(j) - with_far.mean(j)) < 1e-8);
}

TEST_CASE("identity-embedding ablation reduces to a plain GP") {
    Rng rng(94);
    NgpModel model = random_model(small_config(1 /*RM*/, 2, 1), 15);
    for (auto& w : model.mean_params.weights) w.setZero();
    for (auto& b : model.mean_params.biases) b.setZero();

    const Eigen::MatrixXd xo = random_matrix(rng, 5, 2);
    const Eigen::VectorXd yo = random_vector(rng, 5);
    const Eigen::MatrixXd xq = random_matrix(rng, 4, 2);
    const Eigen::VectorXd r = random_vector(rng, 1);

    const Posterior post = posterior(model, r, xo, yo, xq);

    // Plain zero-mean RBF GP on the raw features (the within-task descriptor
    // offsets cancel inside the RBF distance).
    Eigen::MatrixXd c(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) c(i, j) = kernel_eval(model.kernel_params, xo.row(i), xo.row(j));
    c.diagonal().array() += model.noise_variance() + 1e-8;
    Eigen::MatrixXd k_oq(5, 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) k_oq(i, j) = kernel_eval(model.kernel_params, xo.row(i), xq.row(j));
    const Eigen::MatrixXd inv = c.inverse();
    const Eigen::VectorXd mean = k_oq.transpose() * inv * yo;
    for (int j = 0; j < 4; ++j) {
        const double var = model.kernel_params.amplitude() - (k_oq.col(j).transpose() * inv * k_oq.col(j))(0);
        CHECK(std::abs(post.mean(j) - mean(j)) < 1e-9);
        CHECK(std::abs(post.variance(j) - std::max(var, 0.0)) < 1e-9);
    }
}

TEST_CASE("posterior rejects inconsistent shapes") {
    Rng rng(95);
    const NgpModel model = random_model(small_config(0, 2, 1), 16);
    const Eigen::MatrixXd xq = random_matrix(rng, 2, 2);
    const Eigen::VectorXd r = random_vector(rng, 1);
    CHECK_THROWS_AS(posterior(model, r, random_matrix(rng, 3, 2), random_vector(rng, 2), xq), ShapeError);
    CHECK_THROWS_AS(posterior(model, r, random_matrix(rng, 3, 1), random_vector(rng, 3), xq), ShapeError);
}
