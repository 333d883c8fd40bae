"""Neural estimators: implicit-field PINN / plain NN and supervised networks."""
from .mlp import MlpModel, init_mlp, load_model, mlp_forward, mlp_laplacian, save_model
from .pinn import PinnConfig, PinnResult, default_collocation, init_field_model, pinn_loss, pinn_train
from .supervised import NetConfig, SupervisedDataset, SupervisedModel, generate_training_set, supervised_train
