#pragma once
#include <gamsel/types.hpp>
#include <gamsel/ortho_poly.hpp>
#include <gamsel/smoother.hpp>
#include <gamsel/jacobi.hpp>
#include <gamsel/pseudo_spline.hpp>
#include <gamsel/dataset.hpp>
#include <gamsel/model.hpp>
#include <gamsel/optimizer.hpp>
#include <gamsel/logistic.hpp>
#include <gamsel/fit.hpp>
#include <gamsel/serialize.hpp>
#include <gamsel/csv.hpp>
#include <gamsel/cv.hpp>
#include <gamsel/simulate.hpp>
