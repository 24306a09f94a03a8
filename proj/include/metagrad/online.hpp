#pragma once

#include <memory>
#include <string>
#include <utility>

#include "core.hpp"

namespace metagrad {

// Uniform protocol surface shared by the composed learner and the baselines:
// ask for the round's point, then feed back the subgradient taken there.
class OnlineLearner {
public:
    virtual ~OnlineLearner() = default;
    virtual Vector predict() = 0;
    virtual void observe(const Vector& g) = 0;
    virtual std::string name() const = 0;
};

template <class L>
class LearnerAdapter final : public OnlineLearner {
public:
    LearnerAdapter(L learner, std::string name)
        : inner_(std::move(learner)), name_(std::move(name)) {}

    Vector predict() override { return inner_.predict(); }
    void observe(const Vector& g) override { inner_.observe(g); }
    std::string name() const override { return name_; }

    L& inner() { return inner_; }
    const L& inner() const { return inner_; }

private:
    L inner_;
    std::string name_;
};

template <class L>
std::unique_ptr<OnlineLearner> as_online_learner(L learner, std::string name) {
    return std::make_unique<LearnerAdapter<L>>(std::move(learner), std::move(name));
}

}  // namespace metagrad
