#pragma once

#include "gimdp/model.hpp"
#include "gimdp/tilde.hpp"
#include "gimdp/solver.hpp"
#include "gimdp/oracle.hpp"
#include "gimdp/simulator.hpp"
#include "gimdp/random_model.hpp"
#include "gimdp/io.hpp"
