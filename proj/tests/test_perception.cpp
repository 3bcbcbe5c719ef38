#include <doctest.h>

#include <cmath>
#include <numeric>

#include "asat/perception.hpp"
#include "support.hpp"

using namespace asat;
using namespace asat::perception;

namespace {

double logistic(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal();
    }
    return m;
}

graph::Ahin fixture_ahin() {
    const auto dir = testing::fixture_dir();
    return graph::build_ahin(ingest::parse_demographics(testing::read_text(dir / "demographics.csv")).records,
                             ingest::parse_disease(testing::read_text(dir / "disease.csv")).records,
                             ingest::parse_mobility(testing::read_text(dir / "mobility.csv")).records, {});
}

ingest::RawPost dated_post(std::string id, Date date, std::string body) {
    ingest::RawPost p;
    p.post_id = std::move(id);
    p.subreddit = "x";
    p.created = static_cast<std::int64_t>(date.days()) * 86400 + 3600;
    p.body = std::move(body);
    return p;
}

const Lexicon& toy_lexicon() {
    static const Lexicon lex = Lexicon::parse("# toy\ncareful\t1\nreckless\t-2\n");
    return lex;
}

}  // namespace

TEST_SUITE("lexicon") {
    TEST_CASE("logistic of the mean matched weight") {
        CHECK(sentiment_awareness("careful reckless careful", toy_lexicon()) == doctest::Approx(logistic(0.0)));
        CHECK(sentiment_awareness("Careful, careful!", toy_lexicon()) == doctest::Approx(logistic(1.0)));
        CHECK(sentiment_awareness("reckless", toy_lexicon()) == doctest::Approx(logistic(-2.0)));
    }

    TEST_CASE("nothing matched is neutral") {
        CHECK(sentiment_awareness("", toy_lexicon()) == 0.5);
        CHECK(sentiment_awareness("the weather is fine", toy_lexicon()) == 0.5);
    }

    TEST_CASE("a negator flips the next few terms only") {
        const double near_neg = sentiment_awareness("not careful", toy_lexicon());
        const double far_neg = sentiment_awareness("not one two three careful", toy_lexicon());
        CHECK(near_neg < 0.5);
        CHECK(far_neg == doctest::Approx(logistic(1.0)));
        CHECK(sentiment_awareness("never reckless", toy_lexicon()) > 0.5);
    }

    TEST_CASE("bundled lexicon separates cautious from dismissive text") {
        CHECK(sentiment_awareness("Stay home, wash hands and keep distancing. Masks on.") > 0.8);
        CHECK(Lexicon::bundled().size() > 50);
        for (const auto& [token, weight] : Lexicon::bundled().entries()) {
            CHECK(std::abs(weight) <= 3.0);
            CHECK(token == to_lower(token));
        }
    }

    TEST_CASE("bad lexicon lines") {
        CHECK_THROWS_AS(Lexicon::parse("careful 1\n"), ParseError);
        CHECK_THROWS_AS(Lexicon::parse("careful\tx\n"), ParseError);
        CHECK_THROWS_AS(Lexicon::parse("careful\t1\ncareful\t2\n"), ParseError);
    }

    TEST_CASE("scores stay in the unit interval") {
        Rng rng(4);
        const std::vector<std::string> words{"not", "careful", "reckless", "no", "the", "masks", "party"};
        for (int i = 0; i < 500; ++i) {
            std::string text;
            for (std::size_t n = rng.below(12); n > 0; --n) {
                text += words[rng.below(words.size())] + " ";
            }
            const double s = sentiment_awareness(text);
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
    }
}

TEST_SUITE("embeddings") {
    TEST_CASE("unit length, deterministic, seed dependent") {
        const auto a = embed_post("wash your hands");
        CHECK(a.values.size() == static_cast<Eigen::Index>(kDefaultEmbeddingDim));
        CHECK(a.values.norm() == doctest::Approx(1.0));
        CHECK(embed_post("wash your hands").values == a.values);
        CHECK(embed_post("Wash your HANDS!").values == a.values);
        CHECK(embed_post("wash your hands", kDefaultEmbeddingDim, 1).values != a.values);
        CHECK(embed_post("", 8).values == Vector::Zero(8));
    }

    TEST_CASE("condition vector layout") {
        const auto ahin = fixture_ahin();
        const auto id = ahin.require("39035");
        const Date day = Date::from_ymd(2020, 3, 22);
        const auto c = condition_for(ahin, id, day);
        const auto v = c.to_vector();
        REQUIRE(v.size() == static_cast<Eigen::Index>(kConditionDim));
        const auto fv = ahin.feature_vector(id, day);
        for (int i = 0; i < 8; ++i) {
            CHECK(v(i) == doctest::Approx(fv.normalized[static_cast<std::size_t>(i)]));
        }
        CHECK(v(8) == doctest::Approx(ahin.node(id).gps.lat / 90.0));
        CHECK(v(9) == doctest::Approx(ahin.node(id).gps.lon / 180.0));
    }
}

TEST_SUITE("perception model") {
    TEST_CASE("loss gradient matches finite differences") {
        Rng rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            PerceptionModel model(nn::Mlp({6, 5, 1}, {nn::Activation::Tanh, nn::Activation::Identity}, rng));
            const Matrix x = normal_matrix(6, 9, rng);
            Vector y(9);
            for (int i = 0; i < 9; ++i) {
                y(i) = rng.uniform();
            }
            auto grads = model.network().zero_gradients();
            perception_loss(model, x, y, &grads);
            const auto numeric =
                nn::numeric_gradient(model.network(), [&] { return perception_loss(model, x, y, nullptr); });
            CHECK(nn::max_relative_error(grads.flatten(), numeric) < 1e-5);
        }
    }

    TEST_CASE("learns a smooth target") {
        Rng rng(12);
        const Vector w = normal_matrix(8, 1, rng).col(0);
        const Matrix x = normal_matrix(8, 400, rng);
        Vector y(400);
        for (int i = 0; i < 400; ++i) {
            y(i) = logistic(w.dot(x.col(i)) / 2.0);
        }
        PerceptionConfig config;
        config.epochs = 150;
        const auto trained = train_perception(x, y, config);
        CHECK(trained.report.train_size + trained.report.heldout_size == 400);
        CHECK(trained.report.heldout_size == 80);
        CHECK(trained.report.heldout_mae < 0.05);
        CHECK(trained.report.loss_curve.back() < trained.report.loss_curve.front());
        for (int i = 0; i < 20; ++i) {
            const double s = trained.model.score(Vector(x.col(i)));
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
    }

    TEST_CASE("too few examples") {
        Rng rng(1);
        CHECK_THROWS_AS(train_perception(normal_matrix(4, 50, rng), Vector::Zero(50), {}), InsufficientData);
        CHECK_THROWS_AS(train_perception(normal_matrix(4, 50, rng), Vector::Zero(49), {}), InvalidArgument);
    }

    TEST_CASE("checkpoints round-trip exactly") {
        Rng rng(2);
        PerceptionModel model(nn::Mlp({4, 3, 1}, {nn::Activation::Tanh, nn::Activation::Identity}, rng));
        testing::TempDir dir;
        save_perception_model(model, dir / "p.model");
        CHECK(load_perception_model(dir / "p.model").network() == model.network());
        auto pair = CganPair::create(2, 4, 3, 5, rng);
        save_cgan(pair, dir / "c.model");
        const auto back = load_cgan(dir / "c.model");
        CHECK(back.generator == pair.generator);
        CHECK(back.discriminator == pair.discriminator);
        CHECK(back.noise_dim == 2);
        testing::write_text(dir / "bad.model", "garbage");
        CHECK_THROWS_AS(load_cgan(dir / "bad.model"), ParseError);
    }
}

TEST_SUITE("cgan") {
    TEST_CASE("loss gradients match finite differences") {
        Rng rng(21);
        for (int trial = 0; trial < 3; ++trial) {
            auto pair = CganPair::create(3, 4, 2, 6, rng);
            const Matrix real = normal_matrix(4, 7, rng);
            const Matrix real_c = normal_matrix(2, 7, rng);
            const Matrix noise = normal_matrix(3, 5, rng);
            const Matrix fake_c = normal_matrix(2, 5, rng);
            auto d_grads = pair.discriminator.zero_gradients();
            discriminator_loss(pair, real, real_c, noise, fake_c, &d_grads);
            const auto d_num = nn::numeric_gradient(
                pair.discriminator, [&] { return discriminator_loss(pair, real, real_c, noise, fake_c, nullptr); });
            CHECK(nn::max_relative_error(d_grads.flatten(), d_num) < 1e-4);
            for (bool ns : {true, false}) {
                auto g_grads = pair.generator.zero_gradients();
                generator_loss(pair, noise, fake_c, ns, &g_grads);
                const auto g_num = nn::numeric_gradient(
                    pair.generator, [&] { return generator_loss(pair, noise, fake_c, ns, nullptr); });
                CHECK(nn::max_relative_error(g_grads.flatten(), g_num) < 1e-4);
            }
        }
    }

    TEST_CASE("discriminator output is a probability") {
        Rng rng(5);
        const auto pair = CganPair::create(2, 3, 2, 4, rng);
        const Vector d = pair.discriminate(normal_matrix(3, 50, rng) * 100.0, normal_matrix(2, 50, rng));
        CHECK((d.array() > 0.0).all());
        CHECK((d.array() < 1.0).all());
    }

    TEST_CASE("generated embeddings follow their condition") {
        // Real embeddings sit at +c with small spread; the generator should learn the shift.
        Rng rng(9);
        const Eigen::Index n = 400;
        Matrix conditions(1, n), embeddings(2, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = i % 2 ? 1.0 : -1.0;
            conditions(0, i) = c;
            embeddings(0, i) = c + 0.2 * rng.normal();
            embeddings(1, i) = -c + 0.2 * rng.normal();
        }
        CganConfig config;
        config.hidden = 16;
        config.noise_dim = 2;
        config.steps = 2000;
        const auto trained = train_cgan(embeddings, conditions, config);
        CHECK(trained.losses.discriminator.size() == trained.losses.generator.size());
        for (double c : {-1.0, 1.0}) {
            const Matrix cond = Matrix::Constant(1, 300, c);
            Rng draw(77);
            const Matrix g = trained.pair.generate(cond, draw);
            CHECK(g.row(0).mean() == doctest::Approx(c).epsilon(0.3));
            CHECK(g.row(1).mean() == doctest::Approx(-c).epsilon(0.3));
        }
    }

    TEST_CASE("non-finite data is reported as divergence") {
        Rng rng(6);
        Matrix embeddings = normal_matrix(2, 250, rng);
        embeddings(0, 3) = std::nan("");
        CganConfig config;
        config.steps = 200;
        CHECK_THROWS_AS(train_cgan(embeddings, normal_matrix(1, 250, rng), config), CganDivergence);
    }

    TEST_CASE("too few pairs") {
        Rng rng(6);
        CHECK_THROWS_AS(train_cgan(normal_matrix(2, 20, rng), normal_matrix(1, 20, rng), {}), InsufficientData);
    }
}

TEST_SUITE("area perception") {
    TEST_CASE("enough real posts use their mean") {
        const auto ahin = fixture_ahin();
        const std::vector<double> scores{0.2, 0.4, 0.6, 0.8, 1.0};
        const auto p = area_perception(ahin, 0, Date::from_ymd(2020, 3, 22), scores, nullptr, nullptr, {});
        CHECK(p.source == PerceptionSource::Real);
        CHECK(p.value == doctest::Approx(0.6));
        CHECK(p.real_posts == 5);
    }

    TEST_CASE("sparse areas are synthesized when models exist") {
        const auto ahin = fixture_ahin();
        Rng rng(8);
        const auto pair = CganPair::create(4, 8, kConditionDim, 6, rng);
        const PerceptionModel model(nn::Mlp({8, 4, 1}, {nn::Activation::Tanh, nn::Activation::Identity}, rng));
        const std::vector<double> scores{0.9};
        const Date day = Date::from_ymd(2020, 3, 22);
        const auto node = ahin.require("39035");
        const auto a = area_perception(ahin, node, day, scores, &pair, &model, {});
        const auto b = area_perception(ahin, node, day, scores, &pair, &model, {});
        CHECK(a.source == PerceptionSource::Synthetic);
        CHECK(a.value == b.value);
        CHECK(a.value > 0.0);
        CHECK(a.value < 1.0);
        CHECK(a.real_posts == 1);

        const auto wrong = PerceptionModel(nn::Mlp({5, 4, 1}, {nn::Activation::Tanh, nn::Activation::Identity}, rng));
        CHECK_THROWS_AS(area_perception(ahin, node, day, scores, &pair, &wrong, {}), InvalidArgument);
    }

    TEST_CASE("without models: real mean if any, else padded") {
        const auto ahin = fixture_ahin();
        const Date day = Date::from_ymd(2020, 3, 22);
        const std::vector<double> two{0.3, 0.5};
        const auto some = area_perception(ahin, 0, day, two, nullptr, nullptr, {});
        CHECK(some.source == PerceptionSource::Real);
        CHECK(some.value == doctest::Approx(0.4));
        const auto none = area_perception(ahin, 0, day, {}, nullptr, nullptr, {});
        CHECK(none.source == PerceptionSource::Padded);
        CHECK(none.value == 0.0);
    }

    TEST_CASE("the post window covers seven days ending at the date") {
        const Date day = Date::from_ymd(2020, 3, 20);
        std::vector<ingest::RawPost> posts{dated_post("old", Date(day.days() - 7), "a"),
                                           dated_post("edge", Date(day.days() - 6), "b"),
                                           dated_post("today", day, "c"),
                                           dated_post("later", Date(day.days() + 1), "d")};
        const auto index = index_posts(posts, {{"old", "X"}, {"edge", "X"}, {"today", "X"}, {"later", "X"},
                                               {"today", "X"}, {"ghost", "X"}});
        const auto hits = index.posts_for("X", day, 7);
        REQUIRE(hits.size() == 2);
        CHECK(index.posts[hits[0]].post_id == "edge");
        CHECK(index.posts[hits[1]].post_id == "today");
        CHECK(index.posts_for("Y", day, 7).empty());
    }

    TEST_CASE("fixture estimates agree with a direct recount") {
        const auto dir = testing::fixture_dir();
        const auto ahin = fixture_ahin();
        const auto demo = ingest::parse_demographics(testing::read_text(dir / "demographics.csv")).records;
        const ingest::Gazetteer gaz(demo);
        auto posts = ingest::parse_posts(testing::read_text(dir / "posts.jsonl")).records;
        std::vector<PostLocation> locations;
        for (const auto& p : posts) {
            for (const auto& id : ingest::extract_locations(p, gaz).geo_ids) {
                locations.push_back({p.post_id, id, false});
            }
        }
        const auto index = index_posts(posts, locations);
        AreaPerceptionOptions options;
        const auto est = estimate_perceptions(ahin, index, nullptr, nullptr, options, 7);
        CHECK(est.areas.size() == ahin.node_count() * ahin.dates().size());
        std::size_t real = 0;
        for (const auto& [key, value] : est.areas) {
            const auto& [geo_id, date] = key;
            std::vector<double> scores;
            for (const auto& loc : locations) {
                for (const auto& p : posts) {
                    if (p.post_id == loc.post_id && loc.geo_id == geo_id && p.date() <= date &&
                        p.date().days() > date.days() - 7) {
                        scores.push_back(sentiment_awareness(p.text()));
                    }
                }
            }
            if (scores.empty()) {
                CHECK(value.source == PerceptionSource::Padded);
                CHECK(value.value == 0.0);
            } else {
                ++real;
                CHECK(value.source == PerceptionSource::Real);
                CHECK(value.real_posts == scores.size());
                CHECK(value.value ==
                      doctest::Approx(std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size()));
            }
        }
        CHECK(real > 0);

        const auto again = read_estimates(write_estimates(est));
        REQUIRE(again.areas.size() == est.areas.size());
        for (const auto& [key, value] : est.areas) {
            const auto& other = again.areas.at(key);
            CHECK(other.value == value.value);
            CHECK(other.source == value.source);
            CHECK(other.real_posts == value.real_posts);
        }
    }
}
