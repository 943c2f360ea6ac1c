#include <catch2/catch_amalgamated.hpp>

#include <flowgauntlet/models/model.hpp>
#include <flowgauntlet/rng.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

using namespace fg;

namespace {

// Two Gaussian blobs separated along the given feature.
Dataset blob_dataset(int n_per_class, int informative_feature, double gap, std::uint64_t seed,
                     Scale scale = Scale::Standardized) {
    Dataset ds;
    ds.scale = scale;
    Rng rng(seed);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            FlowRecord r;
            r.label = c;
            for (int j = 0; j < kNumFeatures; ++j) r[j] = rng.normal();
            r[informative_feature] += c == 1 ? gap : 0.0;
            ds.records.push_back(r);
        }
    }
    Rng shuffler(seed + 1);
    shuffler.shuffle(ds.records);
    return ds;
}

double max_abs_prob_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// Decision tree.
// ---------------------------------------------------------------------------

TEST_CASE("decision tree fits an axis-aligned split exactly") {
    Dataset ds;
    ds.scale = Scale::Standardized;
    for (int i = 0; i < 20; ++i) {
        FlowRecord r;
        r.label = i < 10 ? 0 : 1;
        r[3] = i < 10 ? -2.0 : 2.0;
        ds.records.push_back(r);
    }
    const DecisionTree tree = DecisionTree::train(ds, DtParams{}, 0);
    for (const auto& r : ds.records) {
        const double p = tree.predict_one(r);
        REQUIRE((r.label == 1 ? p : 1.0 - p) == 1.0);
    }
    // Nothing else separates the classes, so one internal node suffices.
    REQUIRE(tree.n_leaves() == 2);
}

TEST_CASE("decision tree respects depth and leaf-size limits") {
    const Dataset ds = blob_dataset(100, 4, 1.5, 5);

    DtParams stump;
    stump.max_depth = 1;
    const DecisionTree t1 = DecisionTree::train(ds, stump, 0);
    REQUIRE(t1.n_leaves() <= 2);

    DtParams leafy;
    leafy.min_samples_leaf = 50;
    const DecisionTree t2 = DecisionTree::train(ds, leafy, 0);
    for (const auto& node : t2.nodes()) {
        if (node.is_leaf()) REQUIRE(node.n_samples >= 50);
    }

    DtParams capped;
    capped.max_leaf_nodes = 3;
    const DecisionTree t3 = DecisionTree::train(ds, capped, 0);
    REQUIRE(t3.n_leaves() <= 3);
}

TEST_CASE("decision tree entropy criterion also separates the blobs") {
    const Dataset ds = blob_dataset(80, 2, 4.0, 11);
    DtParams p;
    p.criterion = Criterion::Entropy;
    const DecisionTree tree = DecisionTree::train(ds, p, 0);
    const Metrics m = compute_metrics(labels_from_probabilities(tree.predict_proba(ds)), ds.labels());
    REQUIRE(m.f1 > 0.95);
}

TEST_CASE("decision tree training is deterministic in the seed") {
    const Dataset ds = blob_dataset(60, 1, 2.0, 9);
    DtParams p;
    p.splitter = Splitter::Random;
    p.max_features = MaxFeatures::fixed_count(3);
    const DecisionTree a = DecisionTree::train(ds, p, 123);
    const DecisionTree b = DecisionTree::train(ds, p, 123);
    REQUIRE(max_abs_prob_diff(a.predict_proba(ds), b.predict_proba(ds)) == 0.0);
}

TEST_CASE("feature-restricted tree ignores other columns") {
    Dataset ds = blob_dataset(60, 0, 5.0, 13);
    const DecisionTree tree = DecisionTree::train(ds, DtParams{}, 0, {2, 5});
    // Feature 0 carries all signal but is off-limits; the tree can only use
    // noise columns 2 and 5, so no split should reference anything else.
    for (const auto& node : tree.nodes()) {
        if (!node.is_leaf()) REQUIRE((node.feature == 2 || node.feature == 5));
    }
}

// ---------------------------------------------------------------------------
// Random forest.
// ---------------------------------------------------------------------------

TEST_CASE("single-tree forest without bootstrap equals the bare tree") {
    const Dataset ds = blob_dataset(80, 6, 3.0, 17);
    RfParams rf;
    rf.n_estimators = 1;
    rf.bootstrap = false;
    rf.seed = 77;
    rf.tree.max_features = MaxFeatures::all();
    const RandomForest forest = RandomForest::train(ds, rf);
    const DecisionTree tree = DecisionTree::train(ds, rf.tree, 77);
    REQUIRE(max_abs_prob_diff(forest.predict_proba(ds), tree.predict_proba(ds)) == 0.0);
}

TEST_CASE("forest predictions average the trees and jobs do not change them") {
    const Dataset ds = blob_dataset(100, 4, 2.5, 23);
    RfParams rf;
    rf.n_estimators = 9;
    rf.seed = 5;
    const RandomForest serial = RandomForest::train(ds, rf, {}, 1);
    const RandomForest parallel = RandomForest::train(ds, rf, {}, 4);
    REQUIRE(serial.trees().size() == 9);
    REQUIRE(max_abs_prob_diff(serial.predict_proba(ds), parallel.predict_proba(ds)) == 0.0);

    const Metrics m = compute_metrics(labels_from_probabilities(serial.predict_proba(ds)), ds.labels());
    REQUIRE(m.f1 > 0.95);

    // Forest probabilities are tree averages, so they live in [0, 1].
    for (double p : serial.predict_proba(ds)) {
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
    }
}

TEST_CASE("bootstrap resampling differentiates the trees") {
    const Dataset ds = blob_dataset(100, 3, 1.0, 29);
    RfParams rf;
    rf.n_estimators = 2;
    rf.seed = 3;
    const RandomForest forest = RandomForest::train(ds, rf);
    const auto p0 = forest.trees()[0].predict_proba(ds);
    const auto p1 = forest.trees()[1].predict_proba(ds);
    REQUIRE(max_abs_prob_diff(p0, p1) > 0.0);
}

// ---------------------------------------------------------------------------
// MLP.
// ---------------------------------------------------------------------------

TEST_CASE("zero-epoch training reproduces the initialized net") {
    const Dataset ds = blob_dataset(50, 2, 2.0, 31);
    MlpParams p;
    p.epochs = 0;
    p.seed = 99;
    const Mlp trained = Mlp::train(ds, p);
    const Mlp fresh = Mlp::initialize(p);
    const Eigen::MatrixXd x = to_matrix(ds);
    REQUIRE((trained.predict_proba(x) - fresh.predict_proba(x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MLP learns the blobs for every optimizer and activation") {
    const Dataset ds = blob_dataset(150, 5, 3.0, 37);
    for (const auto opt : {OptimizerKind::Adam, OptimizerKind::Sgd, OptimizerKind::Rmsprop}) {
        for (const auto act : {Activation::Relu, Activation::Sigmoid, Activation::Tanh}) {
            MlpParams p;
            p.optimizer = opt;
            p.activation = act;
            // Saturating activations and plain SGD converge slowest; give them room.
            const bool slow = act == Activation::Sigmoid || opt == OptimizerKind::Sgd;
            p.epochs = slow ? 300 : 60;
            p.learning_rate = opt == OptimizerKind::Sgd ? 3e-2 : 1e-3;
            p.seed = 7;
            const Mlp net = Mlp::train(ds, p);
            const Metrics m = compute_metrics(labels_from_probabilities(net.predict_proba(ds)), ds.labels());
            INFO("optimizer " << static_cast<int>(opt) << " activation " << static_cast<int>(act));
            REQUIRE(m.f1 > 0.9);
        }
    }
}

TEST_CASE("MLP training is deterministic in the seed") {
    const Dataset ds = blob_dataset(80, 1, 2.0, 41);
    MlpParams p;
    p.epochs = 10;
    p.seed = 4;
    const Mlp a = Mlp::train(ds, p);
    const Mlp b = Mlp::train(ds, p);
    const Eigen::MatrixXd x = to_matrix(ds);
    REQUIRE((a.predict_proba(x) - b.predict_proba(x)).cwiseAbs().maxCoeff() == 0.0);
    p.seed = 5;
    const Mlp c = Mlp::train(ds, p);
    REQUIRE((a.predict_proba(x) - c.predict_proba(x)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("input gradients match central finite differences") {
    Rng rng(2718);
    for (const auto act : {Activation::Relu, Activation::Sigmoid, Activation::Tanh}) {
        for (const auto loss : {LossKind::BinaryCrossentropy, LossKind::Hinge}) {
            MlpParams p;
            p.activation = act;
            p.loss = loss;
            p.hidden_layers = 2;
            p.nodes_per_layer = 6;
            p.seed = rng.next();
            const Mlp net = Mlp::initialize(p);
            const double h = 1e-5;
            for (int trial = 0; trial < 5; ++trial) {
                Eigen::VectorXd x(kNumFeatures);
                for (int j = 0; j < kNumFeatures; ++j) x(j) = rng.normal();
                const int label = static_cast<int>(rng.below(2));
                const Eigen::VectorXd g = net.loss_input_gradient(x, label);
                for (int j = 0; j < kNumFeatures; ++j) {
                    Eigen::VectorXd xp = x;
                    Eigen::VectorXd xm = x;
                    xp(j) += h;
                    xm(j) -= h;
                    const double fd = (net.loss_value(xp, label) - net.loss_value(xm, label)) / (2.0 * h);
                    if (std::abs(fd) < 1e-6 && std::abs(g(j)) < 1e-6) continue;
                    const double rel = std::abs(g(j) - fd) / std::max(std::abs(g(j)), std::abs(fd));
                    INFO("act " << static_cast<int>(act) << " loss " << static_cast<int>(loss)
                                << " component " << j);
                    REQUIRE(rel < 1e-3);
                }
            }
        }
    }
}

TEST_CASE("margin gradient matches finite differences of 2p-1") {
    MlpParams p;
    p.seed = 12;
    p.activation = Activation::Tanh;  // smooth everywhere
    const Mlp net = Mlp::initialize(p);
    Rng rng(5);
    Eigen::MatrixXd x(4, kNumFeatures);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) x(i, j) = rng.normal();
    }
    const Eigen::MatrixXd g = net.margin_input_gradient(x, 0);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) {
            Eigen::MatrixXd xp = x;
            Eigen::MatrixXd xm = x;
            xp(i, j) += h;
            xm(i, j) -= h;
            const double fp = 2.0 * net.predict_proba(xp)(i) - 1.0;
            const double fm = 2.0 * net.predict_proba(xm)(i) - 1.0;
            const double fd = (fp - fm) / (2.0 * h);
            REQUIRE(g(i, j) == Catch::Approx(fd).margin(1e-4));
        }
    }
}

TEST_CASE("feature-restricted MLP has zero gradient on excluded columns") {
    MlpParams p;
    p.seed = 3;
    const Mlp net = Mlp::initialize(p, {0, 4, 8});
    Eigen::VectorXd x = Eigen::VectorXd::Zero(kNumFeatures);
    x(0) = 0.3;
    x(4) = -0.7;
    const Eigen::VectorXd g = net.loss_input_gradient(x, 1);
    for (int j = 0; j < kNumFeatures; ++j) {
        if (j == 0 || j == 4 || j == 8) continue;
        REQUIRE(g(j) == 0.0);
    }
    // Excluded columns cannot influence the output either.
    Eigen::VectorXd x2 = x;
    x2(3) = 100.0;
    Eigen::MatrixXd rows(2, kNumFeatures);
    rows.row(0) = x.transpose();
    rows.row(1) = x2.transpose();
    const Eigen::VectorXd probs = net.predict_proba(rows);
    REQUIRE(probs(0) == probs(1));
}

TEST_CASE("MLP rejects invalid parameters") {
    Dataset ds = blob_dataset(10, 0, 1.0, 2);
    MlpParams bad;
    bad.hidden_layers = 0;
    REQUIRE_THROWS_AS(Mlp::train(ds, bad), ConfigError);
    MlpParams bad2;
    bad2.learning_rate = 0.0;
    REQUIRE_THROWS_AS(Mlp::train(ds, bad2), ConfigError);
    MlpParams ok;
    Dataset original = ds;
    original.scale = Scale::Original;
    REQUIRE_THROWS_AS(Mlp::train(original, ok), NonStandardizedInputError);
}

// ---------------------------------------------------------------------------
// Model variant + persistence.
// ---------------------------------------------------------------------------

TEST_CASE("model variant dispatches and persists every kind") {
    const Dataset ds = blob_dataset(60, 4, 3.0, 53);
    const Eigen::MatrixXd x = to_matrix(ds);
    const std::string path = (std::filesystem::temp_directory_path() / "fg_model.json").string();

    MlpParams mp;
    mp.epochs = 5;
    mp.seed = 1;
    RfParams rp;
    rp.n_estimators = 3;

    const std::vector<Model> models{
        Model{DecisionTree::train(ds, DtParams{}, 1)},
        Model{RandomForest::train(ds, rp)},
        Model{Mlp::train(ds, mp)},
    };
    const std::vector<ModelKind> kinds{ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Mlp};

    for (std::size_t i = 0; i < models.size(); ++i) {
        REQUIRE(kind_of(models[i]) == kinds[i]);
        save_model(models[i], path);
        const Model back = load_model(path);
        REQUIRE(kind_of(back) == kinds[i]);
        const Eigen::VectorXd pa = predict_proba(models[i], x);
        const Eigen::VectorXd pb = predict_proba(back, x);
        REQUIRE((pa - pb).cwiseAbs().maxCoeff() == 0.0);
    }
    std::remove(path.c_str());

    REQUIRE_THROWS_AS(as_mlp(models[0]), WrongModelKindError);
    REQUIRE_NOTHROW(as_mlp(models[2]));
}

TEST_CASE("predict_labels thresholds at one half") {
    const Dataset ds = blob_dataset(40, 7, 4.0, 59);
    const Model m{DecisionTree::train(ds, DtParams{}, 0)};
    const auto labels = predict_labels(m, ds);
    const Eigen::VectorXd probs = predict_proba(m, to_matrix(ds));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        REQUIRE(labels[i] == (probs(static_cast<Eigen::Index>(i)) > 0.5 ? 1 : 0));
    }
}
