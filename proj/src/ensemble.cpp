#include <mcaurora/ensemble.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcaurora {

namespace {

    constexpr double std_floor = 1e-8;

    Matrix centered(const Matrix& z)
    {
        Matrix zc = z;
        zc.rowwise() -= z.colwise().mean();
        return zc;
    }

    Matrix concat_columns(std::span<const Matrix> zs)
    {
        Eigen::Index cols = 0;
        for (const auto& z : zs)
            cols += z.cols();
        Matrix out(zs.front().rows(), cols);
        Eigen::Index c = 0;
        for (const auto& z : zs) {
            out.middleCols(c, z.cols()) = z;
            c += z.cols();
        }
        return out;
    }

    void require_batch(std::span<const Matrix> ms, Eigen::Index min_rows, const char* what)
    {
        if (ms.empty())
            throw StructuralError(std::string(what) + ": no modules");
        for (const auto& m : ms)
            if (m.rows() != ms.front().rows() || m.cols() != ms.front().cols())
                throw StructuralError(std::string(what) + ": module outputs differ in shape");
        if (ms.front().rows() < min_rows)
            throw StructuralError(std::string(what) + ": batch needs at least " + std::to_string(min_rows) + " samples");
    }

    struct CorrelationParts {
        Matrix zc;
        Matrix cov;
        nn::Vector sd;
        Matrix r;
    };

    CorrelationParts correlation_parts(const Matrix& z)
    {
        CorrelationParts p;
        p.zc = centered(z);
        p.cov = p.zc.transpose() * p.zc / static_cast<double>(z.rows() - 1);
        p.sd = p.cov.diagonal().cwiseSqrt().cwiseMax(std_floor);
        p.r = p.cov.cwiseQuotient(p.sd * p.sd.transpose());
        return p;
    }

    // d d_corr(h1, h2) / d h1 and / d h2, ignoring the final clamp
    std::pair<Matrix, Matrix> d_corr_grad(const Matrix& h1, const Matrix& h2)
    {
        const double a = (h1 * h2).trace();
        const double n1 = h1.norm();
        const double n2 = h2.norm();
        Matrix g1 = -(h2.transpose() / (n1 * n2) - a * h1 / (n1 * n1 * n1 * n2));
        Matrix g2 = -(h1.transpose() / (n1 * n2) - a * h2 / (n1 * n2 * n2 * n2));
        return {std::move(g1), std::move(g2)};
    }

} // namespace

const char* to_string(DiversityKind kind)
{
    switch (kind) {
    case DiversityKind::None:
        return "none";
    case DiversityKind::Outputs:
        return "outputs";
    case DiversityKind::Cov:
        return "cov";
    case DiversityKind::Cmd:
        return "cmd";
    }
    return "?";
}

DiversityKind diversity_kind_from_string(const std::string& s)
{
    if (s == "none")
        return DiversityKind::None;
    if (s == "outputs")
        return DiversityKind::Outputs;
    if (s == "cov")
        return DiversityKind::Cov;
    if (s == "cmd")
        return DiversityKind::Cmd;
    throw StructuralError("unknown diversity loss '" + s + "'");
}

InputScaling InputScaling::fit(std::span<const ObservationMatrix> corpus)
{
    if (corpus.empty())
        throw StructuralError("cannot fit input scaling on an empty corpus");
    InputScaling s;
    s.channels = corpus.front().channels();
    s.timepoints = corpus.front().timepoints();
    s.lo.assign(s.channels, std::numeric_limits<double>::infinity());
    s.hi.assign(s.channels, -std::numeric_limits<double>::infinity());
    for (const auto& obs : corpus) {
        if (obs.channels() != s.channels || obs.timepoints() != s.timepoints)
            throw StructuralError("observation shapes differ within the training corpus");
        for (std::size_t c = 0; c < s.channels; ++c)
            for (double v : obs.channel(c)) {
                s.lo[c] = std::min(s.lo[c], v);
                s.hi[c] = std::max(s.hi[c], v);
            }
    }
    return s;
}

InputScaling InputScaling::identity(std::size_t channels, std::size_t timepoints)
{
    InputScaling s;
    s.channels = channels;
    s.timepoints = timepoints;
    s.lo.assign(channels, 0.0);
    s.hi.assign(channels, 1.0);
    return s;
}

Matrix InputScaling::apply(std::span<const ObservationMatrix> observations) const
{
    Matrix out(static_cast<Eigen::Index>(observations.size()), static_cast<Eigen::Index>(channels * timepoints));
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& obs = observations[i];
        if (obs.channels() != channels || obs.timepoints() != timepoints)
            throw StructuralError("observation shape does not match the model's input scaling");
        if (!obs.all_finite())
            throw InvalidEvaluationError("non-finite observation");
        for (std::size_t c = 0; c < channels; ++c) {
            const double range = hi[c] - lo[c];
            const auto ch = obs.channel(c);
            for (std::size_t t = 0; t < timepoints; ++t)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c * timepoints + t))
                    = range > 1e-12 ? (ch[t] - lo[c]) / range : 0.5;
        }
    }
    return out;
}

Matrix InputScaling::apply(const ObservationMatrix& observation) const
{
    return apply(std::span<const ObservationMatrix>(&observation, 1));
}

double loss_recons(std::span<const Matrix> ys, const Matrix& x)
{
    require_batch(ys, 1, "loss_recons");
    double total = 0.0;
    for (const auto& y : ys) {
        if (y.rows() != x.rows() || y.cols() != x.cols())
            throw StructuralError("loss_recons: reconstruction shape differs from input");
        total += (y - x).squaredNorm() / static_cast<double>(x.rows());
    }
    return total / static_cast<double>(ys.size());
}

void add_loss_recons_grad(std::span<const Matrix> ys, const Matrix& x, double scale, std::span<Matrix> dys)
{
    const double k = scale * 2.0 / (static_cast<double>(ys.size()) * static_cast<double>(x.rows()));
    for (std::size_t m = 0; m < ys.size(); ++m)
        dys[m] += k * (ys[m] - x);
}

double loss_outputs(std::span<const Matrix> ys)
{
    require_batch(ys, 1, "loss_outputs");
    Matrix mean = Matrix::Zero(ys.front().rows(), ys.front().cols());
    for (const auto& y : ys)
        mean += y;
    mean /= static_cast<double>(ys.size());
    double total = 0.0;
    for (const auto& y : ys)
        total += (y - mean).squaredNorm();
    return total / (static_cast<double>(ys.front().rows()) * static_cast<double>(ys.size()));
}

void add_loss_outputs_grad(std::span<const Matrix> ys, double scale, std::span<Matrix> dys)
{
    Matrix mean = Matrix::Zero(ys.front().rows(), ys.front().cols());
    for (const auto& y : ys)
        mean += y;
    mean /= static_cast<double>(ys.size());
    // the deviations sum to zero over modules, so the mean's own dependence
    // on y_m contributes nothing
    const double k = scale * 2.0 / (static_cast<double>(ys.front().rows()) * static_cast<double>(ys.size()));
    for (std::size_t m = 0; m < ys.size(); ++m)
        dys[m] += k * (ys[m] - mean);
}

double loss_cov(std::span<const Matrix> zs)
{
    require_batch(zs, 2, "loss_cov");
    const Matrix z = concat_columns(zs);
    const Matrix zc = centered(z);
    const Matrix cov = zc.transpose() * zc / static_cast<double>(z.rows() - 1);
    return cov.cwiseAbs().sum() - cov.diagonal().cwiseAbs().sum();
}

void add_loss_cov_grad(std::span<const Matrix> zs, double scale, std::span<Matrix> dzs)
{
    const Matrix z = concat_columns(zs);
    const Matrix zc = centered(z);
    const Matrix cov = zc.transpose() * zc / static_cast<double>(z.rows() - 1);
    Matrix sign = cov.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    sign.diagonal().setZero();
    const Matrix dz = scale * 2.0 * zc * sign / static_cast<double>(z.rows() - 1);
    Eigen::Index c = 0;
    for (std::size_t m = 0; m < zs.size(); ++m) {
        dzs[m] += dz.middleCols(c, zs[m].cols());
        c += zs[m].cols();
    }
}

Matrix correlation_matrix(const Matrix& z)
{
    if (z.rows() < 2)
        throw StructuralError("correlation matrix needs at least 2 samples");
    return correlation_parts(z).r;
}

double d_corr(const Matrix& h1, const Matrix& h2)
{
    if (h1.rows() != h2.rows() || h1.cols() != h2.cols() || h1.rows() != h1.cols())
        throw StructuralError("d_corr: matrices must be square and of equal size");
    const double n1 = h1.norm();
    const double n2 = h2.norm();
    if (n1 == 0.0 || n2 == 0.0)
        throw StructuralError("d_corr: zero Frobenius norm");
    const double d = 1.0 - (h1 * h2).trace() / (n1 * n2);
    return std::clamp(d, 0.0, 1.0);
}

double loss_cmd(std::span<const Matrix> zs)
{
    require_batch(zs, 2, "loss_cmd");
    if (zs.front().cols() < 2)
        throw StructuralError("loss_cmd: latent dimensionality must be at least 2");
    std::vector<Matrix> rs;
    rs.reserve(zs.size());
    for (const auto& z : zs)
        rs.push_back(correlation_matrix(z));
    double total = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i)
        for (std::size_t j = 0; j < rs.size(); ++j)
            if (i != j)
                total += d_corr(rs[i], rs[j]);
    return total;
}

void add_loss_cmd_grad(std::span<const Matrix> zs, double scale, std::span<Matrix> dzs)
{
    const std::size_t n = zs.size();
    std::vector<CorrelationParts> parts;
    parts.reserve(n);
    for (const auto& z : zs)
        parts.push_back(correlation_parts(z));

    const Eigen::Index d = zs.front().cols();
    std::vector<Matrix> dr(n, Matrix::Zero(d, d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            auto [g1, g2] = d_corr_grad(parts[i].r, parts[j].r);
            dr[i] += g1;
            dr[j] += g2;
        }

    for (std::size_t m = 0; m < n; ++m) {
        const auto& p = parts[m];
        const Matrix& g = dr[m];
        Matrix dcov = g.cwiseQuotient(p.sd * p.sd.transpose());
        for (Eigen::Index k = 0; k < d; ++k) {
            if (std::sqrt(p.cov(k, k)) <= std_floor)
                continue;
            const double dsd = -(g.row(k).cwiseProduct(p.r.row(k)).sum() + g.col(k).cwiseProduct(p.r.col(k)).sum()) / p.sd(k);
            dcov(k, k) += dsd / (2.0 * p.sd(k));
        }
        Matrix dzc = p.zc * (dcov + dcov.transpose()) / static_cast<double>(zs[m].rows() - 1);
        dzc.rowwise() -= dzc.colwise().mean();
        dzs[m] += scale * dzc;
    }
}

ModularAutoEncoderEnsemble::ModularAutoEncoderEnsemble(EnsembleTopology topology, DiversityConfig diversity)
    : _topology(std::move(topology)), _diversity(diversity)
{
    if (_topology.modules < 1)
        throw StructuralError("ensemble needs at least one module");
    if (_topology.input_dim < 1 || _topology.latent_dim < 1)
        throw StructuralError("ensemble input and latent dimensions must be positive");
    if (_diversity.sign != 1 && _diversity.sign != -1)
        throw StructuralError("diversity sign must be +1 or -1");

    std::vector<int> enc_sizes{_topology.input_dim};
    enc_sizes.insert(enc_sizes.end(), _topology.hidden.begin(), _topology.hidden.end());
    enc_sizes.push_back(_topology.latent_dim);
    std::vector<nn::Activation> enc_act(enc_sizes.size() - 1, nn::Activation::Elu);
    enc_act.back() = nn::Activation::Sigmoid;
    std::vector<double> enc_drop(enc_sizes.size() - 1, _topology.dropout);
    enc_drop.back() = 0.0;

    std::vector<int> dec_sizes(enc_sizes.rbegin(), enc_sizes.rend());
    std::vector<nn::Activation> dec_act(dec_sizes.size() - 1, nn::Activation::Elu);
    dec_act.back() = nn::Activation::Sigmoid;
    std::vector<double> dec_drop(dec_sizes.size() - 1, _topology.dropout);
    dec_drop.back() = 0.0;

    for (int m = 0; m < _topology.modules; ++m)
        _modules.push_back({nn::DenseNet(enc_sizes, enc_act, enc_drop), nn::DenseNet(dec_sizes, dec_act, dec_drop)});
}

void ModularAutoEncoderEnsemble::xavier_uniform_init(Rng& rng)
{
    for (auto& m : _modules) {
        m.encoder.xavier_uniform_init(rng);
        m.decoder.xavier_uniform_init(rng);
    }
}

ModularAutoEncoderEnsemble::Pass ModularAutoEncoderEnsemble::forward(const Matrix& x, Rng* dropout_rng, bool keep_cache) const
{
    if (!x.allFinite())
        throw InvalidEvaluationError("non-finite auto-encoder input");
    Pass pass;
    pass.z.resize(_modules.size());
    pass.y.resize(_modules.size());
    if (keep_cache) {
        pass.encoder_cache.resize(_modules.size());
        pass.decoder_cache.resize(_modules.size());
    }
    for (std::size_t m = 0; m < _modules.size(); ++m) {
        pass.z[m] = _modules[m].encoder.forward(x, keep_cache ? &pass.encoder_cache[m] : nullptr, dropout_rng);
        pass.y[m] = _modules[m].decoder.forward(pass.z[m], keep_cache ? &pass.decoder_cache[m] : nullptr, dropout_rng);
    }
    return pass;
}

std::pair<nn::Vector, nn::Vector> ModularAutoEncoderEnsemble::forward_one(std::size_t m, std::span<const double> x) const
{
    Matrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (!row.allFinite())
        throw InvalidEvaluationError("non-finite auto-encoder input");
    const auto& mod = _modules.at(m);
    Matrix z = mod.encoder.forward(row);
    Matrix y = mod.decoder.forward(z);
    return {z.row(0).transpose(), y.row(0).transpose()};
}

Matrix ModularAutoEncoderEnsemble::encode(std::size_t m, const Matrix& x) const
{
    if (!x.allFinite())
        throw InvalidEvaluationError("non-finite auto-encoder input");
    return _modules.at(m).encoder.forward(x);
}

LossBreakdown ModularAutoEncoderEnsemble::combine(double recons, double diversity) const
{
    LossBreakdown out;
    out.recons = recons;
    out.diversity = diversity;
    out.combined = _diversity.kind == DiversityKind::None ? recons : recons + _diversity.sign * _diversity.lambda * diversity;
    return out;
}

namespace {
    double diversity_term(DiversityKind kind, const ModularAutoEncoderEnsemble::Pass& pass)
    {
        switch (kind) {
        case DiversityKind::None:
            return 0.0;
        case DiversityKind::Outputs:
            return loss_outputs(pass.y);
        case DiversityKind::Cov:
            return loss_cov(pass.z);
        case DiversityKind::Cmd:
            return loss_cmd(pass.z);
        }
        return 0.0;
    }
} // namespace

LossBreakdown ModularAutoEncoderEnsemble::losses(const Matrix& x) const
{
    const auto pass = forward(x);
    return combine(loss_recons(pass.y, x), diversity_term(_diversity.kind, pass));
}

std::vector<std::span<double>> ModularAutoEncoderEnsemble::GradientResult::blocks()
{
    std::vector<std::span<double>> out;
    for (std::size_t m = 0; m < encoder.size(); ++m) {
        for (auto b : nn::gradient_blocks(encoder[m]))
            out.push_back(b);
        for (auto b : nn::gradient_blocks(decoder[m]))
            out.push_back(b);
    }
    return out;
}

std::vector<std::span<double>> ModularAutoEncoderEnsemble::parameters()
{
    std::vector<std::span<double>> out;
    for (auto& m : _modules) {
        for (auto b : m.encoder.parameters())
            out.push_back(b);
        for (auto b : m.decoder.parameters())
            out.push_back(b);
    }
    return out;
}

ModularAutoEncoderEnsemble::GradientResult ModularAutoEncoderEnsemble::gradients(const Matrix& x, Rng* dropout_rng) const
{
    const auto pass = forward(x, dropout_rng, true);
    const std::size_t n = _modules.size();

    GradientResult result;
    result.loss = combine(loss_recons(pass.y, x), diversity_term(_diversity.kind, pass));

    std::vector<Matrix> dys(n), dzs(n);
    for (std::size_t m = 0; m < n; ++m) {
        dys[m] = Matrix::Zero(pass.y[m].rows(), pass.y[m].cols());
        dzs[m] = Matrix::Zero(pass.z[m].rows(), pass.z[m].cols());
    }
    add_loss_recons_grad(pass.y, x, 1.0, dys);
    const double k = _diversity.sign * _diversity.lambda;
    switch (_diversity.kind) {
    case DiversityKind::None:
        break;
    case DiversityKind::Outputs:
        add_loss_outputs_grad(pass.y, k, dys);
        break;
    case DiversityKind::Cov:
        add_loss_cov_grad(pass.z, k, dzs);
        break;
    case DiversityKind::Cmd:
        add_loss_cmd_grad(pass.z, k, dzs);
        break;
    }

    for (std::size_t m = 0; m < n; ++m) {
        result.encoder.push_back(_modules[m].encoder.zero_gradients());
        result.decoder.push_back(_modules[m].decoder.zero_gradients());
        Matrix dz = _modules[m].decoder.backward(pass.decoder_cache[m], dys[m], result.decoder[m]);
        dz += dzs[m];
        _modules[m].encoder.backward(pass.encoder_cache[m], dz, result.encoder[m]);
    }
    return result;
}

double loss_recons(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch)
{
    return loss_recons(ensemble.forward(batch).y, batch);
}

double loss_outputs(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch)
{
    return loss_outputs(ensemble.forward(batch).y);
}

double loss_cov(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch)
{
    return loss_cov(ensemble.forward(batch).z);
}

double loss_cmd(const ModularAutoEncoderEnsemble& ensemble, const Matrix& batch)
{
    return loss_cmd(ensemble.forward(batch).z);
}

namespace {

    Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows)
    {
        Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
        return out;
    }

    void shuffle(std::vector<std::size_t>& v, Rng& rng)
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.index(i)]);
    }

} // namespace

TrainReport train_ensemble(ModularAutoEncoderEnsemble& ensemble, const Matrix& inputs, const TrainingConfig& cfg, Rng& rng)
{
    if (inputs.rows() == 0)
        throw StructuralError("cannot train on an empty corpus");
    if (!(cfg.validation_split > 0.0 && cfg.validation_split < 1.0))
        throw StructuralError("validation split must lie in (0, 1)");
    if (cfg.batch_size < 1 || cfg.epochs < 0)
        throw StructuralError("invalid batch size or epoch count");

    const std::size_t n = static_cast<std::size_t>(inputs.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);

    std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.validation_split));
    if (n_val < 2 || n - n_val < 2)
        n_val = 0;
    std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    const Matrix val = gather_rows(inputs, val_rows);

    nn::Adam adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    auto params = ensemble.parameters();
    TrainReport report;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(train_rows, rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train_rows.size();) {
            std::size_t end = std::min(start + bs, train_rows.size());
            // a trailing single sample is folded into the previous batch
            if (train_rows.size() - end == 1)
                ++end;
            const Matrix batch = gather_rows(inputs, std::span(train_rows).subspan(start, end - start));
            auto grads = ensemble.gradients(batch, &rng);
            const double loss = grads.loss.combined;
            if (!std::isfinite(loss)) {
                report.diverged = true;
                report.message = "non-finite training loss at epoch " + std::to_string(epoch);
                return report;
            }
            adam.step(params, grads.blocks());
            epoch_loss += loss * static_cast<double>(end - start);
            seen += end - start;
            start = end;
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(seen, 1)));
        if (n_val > 0) {
            const double vl = ensemble.combined_loss(val);
            if (!std::isfinite(vl)) {
                report.diverged = true;
                report.message = "non-finite validation loss at epoch " + std::to_string(epoch);
                return report;
            }
            report.validation_loss.push_back(vl);
        }
        report.epochs_completed = epoch + 1;
    }
    for (auto block : params)
        for (double v : block)
            if (!std::isfinite(v)) {
                report.diverged = true;
                report.message = "non-finite parameters after training";
                return report;
            }
    return report;
}

TrainReport train_ensemble(ModularAutoEncoderEnsemble& ensemble, std::span<const ObservationMatrix> corpus,
                           const TrainingConfig& cfg, Rng& rng)
{
    auto scaling = InputScaling::fit(corpus);
    const Matrix inputs = scaling.apply(corpus);
    if (static_cast<std::size_t>(inputs.cols()) != ensemble.input_dim())
        throw StructuralError("corpus observation size does not match the ensemble input dimension");
    ensemble.set_scaling(std::move(scaling));
    return train_ensemble(ensemble, inputs, cfg, rng);
}

} // namespace mcaurora
